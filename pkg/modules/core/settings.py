"""
Settings management module for PulseSync
Handles loading/saving simulation defaults from a JSON file and environment
"""

import json
import logging
import os
import tempfile
import threading
from pathlib import Path
from typing import Any, Dict, Optional

from .constants import (
    ADVERSARY_KINDS, COVER_MODES, DEFAULT_EDGE_BIAS_EPSILON, DEFAULT_EVENT_CAP,
    DEFAULT_RADIUS_SHIFT,
)
from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS: Dict[str, Any] = {
    'event_cap': DEFAULT_EVENT_CAP,
    'radius_shift': DEFAULT_RADIUS_SHIFT,
    'trace': False,
    'sweep_workers': 1,
    'cover_mode': 'sync',
    'edge_biased_epsilon': DEFAULT_EDGE_BIAS_EPSILON,
    'debug_order_check': False,
    'default_adversary': 'max-delay',
}

# Environment variable -> (settings key, parser)
_ENV_OVERRIDES = {
    'PULSESYNC_EVENT_CAP': ('event_cap', int),
    'PULSESYNC_RADIUS_SHIFT': ('radius_shift', int),
    'PULSESYNC_TRACE': ('trace', lambda v: v.strip().lower() in ('1', 'true', 'yes', 'on')),
    'PULSESYNC_SWEEP_WORKERS': ('sweep_workers', int),
    'PULSESYNC_COVER_MODE': ('cover_mode', str),
    'PULSESYNC_DEBUG_ORDER_CHECK': ('debug_order_check',
                                    lambda v: v.strip().lower() in ('1', 'true', 'yes', 'on')),
}


class SettingsManager:
    """Loads simulation defaults: built-in defaults, then settings file, then environment"""

    def __init__(self, settings_file: Optional[Path] = None):
        self.settings_file = Path(settings_file) if settings_file else None
        # RLock so atomic_update -> load -> save does not deadlock on the same thread
        self._lock = threading.RLock()

    def load_settings(self) -> Dict[str, Any]:
        """Return the merged settings dict, validated."""
        with self._lock:
            settings = dict(DEFAULT_SETTINGS)
            if self.settings_file and self.settings_file.exists():
                try:
                    with open(self.settings_file, 'r', encoding='utf-8') as f:
                        content = f.read()
                    on_disk = json.loads(content) if content.strip() else {}
                    if not isinstance(on_disk, dict):
                        raise ConfigError(f"settings file {self.settings_file} must hold a JSON object")
                    unknown = set(on_disk) - set(DEFAULT_SETTINGS)
                    if unknown:
                        logger.warning(f"Ignoring unknown settings keys: {sorted(unknown)}")
                    settings.update({k: v for k, v in on_disk.items() if k in DEFAULT_SETTINGS})
                except json.JSONDecodeError as e:
                    raise ConfigError(f"settings file {self.settings_file} is not valid JSON: {e}") from e

            for env_name, (key, parse) in _ENV_OVERRIDES.items():
                raw = os.getenv(env_name)
                if raw is None or raw == '':
                    continue
                try:
                    settings[key] = parse(raw)
                except ValueError as e:
                    raise ConfigError(f"{env_name}={raw!r} is not valid: {e}") from e

            self._validate(settings)
            return settings

    @staticmethod
    def _validate(settings: Dict[str, Any]):
        if int(settings['event_cap']) < 1:
            raise ConfigError("event_cap must be positive")
        if int(settings['radius_shift']) < 0:
            raise ConfigError("radius_shift must be non-negative")
        if int(settings['sweep_workers']) < 1:
            raise ConfigError("sweep_workers must be at least 1")
        if settings['cover_mode'] not in COVER_MODES:
            raise ConfigError(f"cover_mode must be one of {COVER_MODES}")
        eps = float(settings['edge_biased_epsilon'])
        if not 0 < eps <= 1:
            raise ConfigError("edge_biased_epsilon must lie in (0, 1]")
        if settings['default_adversary'].split(':')[0] not in ADVERSARY_KINDS:
            raise ConfigError(f"default_adversary must be one of {ADVERSARY_KINDS}")

    def save_settings(self, settings: Dict[str, Any]) -> bool:
        """Write settings atomically (temp file + rename). Returns False on I/O failure."""
        if self.settings_file is None:
            logger.error("No settings file configured; nothing saved")
            return False
        with self._lock:
            self._validate({**DEFAULT_SETTINGS, **settings})
            try:
                self.settings_file.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp_path = tempfile.mkstemp(dir=str(self.settings_file.parent), suffix='.tmp')
                try:
                    with os.fdopen(fd, 'w', encoding='utf-8') as f:
                        json.dump(settings, f, indent=2, sort_keys=True)
                    os.replace(tmp_path, self.settings_file)
                except Exception:
                    try:
                        os.unlink(tmp_path)
                    except OSError:
                        pass
                    raise
                return True
            except OSError as e:
                logger.error(f"Error saving settings to {self.settings_file}: {e}")
                return False

    def atomic_update(self, incoming: Dict[str, Any]) -> bool:
        """Thread-safe read-merge-write of the settings file."""
        with self._lock:
            existing = {}
            if self.settings_file and self.settings_file.exists():
                with open(self.settings_file, 'r', encoding='utf-8') as f:
                    content = f.read()
                existing = json.loads(content) if content.strip() else {}
            return self.save_settings({**existing, **incoming})
