"""
PulseSync - pulse-gated synchronizer simulator
Command-line entry point
"""
import os
import sys
import logging

from dotenv import load_dotenv

load_dotenv()

from modules.core import configure_structured_logging  # noqa: E402
from modules.harness import main  # noqa: E402

# Results go to stdout, so logs default to plain WARNING on stderr
json_logging = os.getenv('PULSESYNC_LOG_JSON', 'false').lower() == 'true'
log_level_name = os.getenv('PULSESYNC_LOG_LEVEL', 'WARNING').upper()
log_level = getattr(logging, log_level_name, logging.WARNING)
configure_structured_logging(level=log_level, json_output=json_logging)

if __name__ == '__main__':
    sys.exit(main())
