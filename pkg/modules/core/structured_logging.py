"""
Structured logging for PulseSync runs and sweeps.

Keyword arguments given to a component logger become fields of the log
record. Fields bound with `LogContext` (algorithm, graph, adversary, seed)
are attached to every record emitted inside the block, including records
from plain `logging.getLogger(__name__)` loggers. Output is either one JSON
object per line or a text line with the run fields appended, always on
stderr so stdout stays free for JSON/CSV results.

    logger = get_pulsesync_logger('bfs')
    with LogContext(algorithm='bfs', graph='path:64:1', seed=1):
        logger.info("iteration finished", iteration=3, messages=1812)
"""

import json
import logging
import os
import time
from contextvars import ContextVar
from functools import wraps
from typing import Any, Dict, Optional

from .utils import jsonable, utc_now

_run_fields: ContextVar[Dict[str, Any]] = ContextVar('pulsesync_run_fields', default={})

# Run identity first in text output, in this order
RUN_FIELD_ORDER = ('algorithm', 'graph', 'adversary', 'seed')

# Attributes every LogRecord carries; anything else was passed as a field
_RECORD_ATTRS = frozenset(vars(logging.LogRecord('', 0, '', 0, '', None, None))) | {'message', 'asctime'}


def _extra_fields(record: logging.LogRecord) -> Dict[str, Any]:
    return {k: v for k, v in vars(record).items() if k not in _RECORD_ATTRS and not k.startswith('_')}


def _json_safe(value: Any) -> Any:
    try:
        json.dumps(value)
        return value
    except (TypeError, ValueError):
        return str(value)


class JSONFormatter(logging.Formatter):
    """One JSON object per record: base fields, run fields, then record fields."""

    def __init__(self, include_hostname: bool = True, include_pid: bool = True):
        super().__init__()
        self._hostname = os.uname().nodename if include_hostname else None
        self._pid = os.getpid() if include_pid else None

    def format(self, record: logging.LogRecord) -> str:
        entry: Dict[str, Any] = {
            'timestamp': utc_now().isoformat() + 'Z',
            'level': record.levelname.lower(),
            'logger': record.name,
            'message': record.getMessage(),
        }
        if record.levelno >= logging.WARNING:
            entry['source'] = {'file': record.filename, 'line': record.lineno, 'function': record.funcName}
        if self._hostname:
            entry['host'] = self._hostname
        # sweep workers are separate processes
        if self._pid:
            entry['pid'] = self._pid

        entry.update(_run_fields.get())
        for key, value in _extra_fields(record).items():
            entry[key] = _json_safe(value)
        if record.exc_info:
            entry['exception'] = self.formatException(record.exc_info)
        return json.dumps(entry, default=str)


class RunFieldsFormatter(logging.Formatter):
    """Text lines with `key=value` pairs for the run identity and record fields."""

    def __init__(self):
        super().__init__('%(asctime)s %(levelname)-7s %(name)s: %(message)s', datefmt='%H:%M:%S')

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        fields = dict(_run_fields.get())
        fields.update(_extra_fields(record))
        if not fields:
            return line
        ordered = [k for k in RUN_FIELD_ORDER if k in fields] + sorted(k for k in fields if k not in RUN_FIELD_ORDER)
        return line + ' [' + ' '.join(f"{k}={fields[k]}" for k in ordered) + ']'


class StructuredLogger:
    """Component logger: `logger.info(msg, **fields)`; fields that are None are dropped."""

    def __init__(self, logger: logging.Logger):
        self._logger = logger

    @property
    def name(self) -> str:
        return self._logger.name

    def log(self, level: int, msg: str, **fields) -> None:
        if self._logger.isEnabledFor(level):
            self._logger.log(level, msg, extra={k: v for k, v in fields.items() if v is not None})

    def debug(self, msg: str, **fields) -> None:
        self.log(logging.DEBUG, msg, **fields)

    def info(self, msg: str, **fields) -> None:
        self.log(logging.INFO, msg, **fields)

    def warning(self, msg: str, **fields) -> None:
        self.log(logging.WARNING, msg, **fields)

    def error(self, msg: str, **fields) -> None:
        self.log(logging.ERROR, msg, **fields)


class LogContext:
    """Binds run fields for the duration of a `with` block; blocks nest."""

    def __init__(self, **fields):
        self.fields = {k: v for k, v in fields.items() if v is not None}
        self._token = None

    def __enter__(self) -> 'LogContext':
        self._token = _run_fields.set({**_run_fields.get(), **self.fields})
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        _run_fields.reset(self._token)
        return False

    def add(self, **fields) -> None:
        set_context(**fields)


def set_context(**fields) -> None:
    _run_fields.set({**_run_fields.get(), **fields})


def clear_context() -> None:
    _run_fields.set({})


def get_context() -> Dict[str, Any]:
    return dict(_run_fields.get())


def get_logger(name: str) -> StructuredLogger:
    return StructuredLogger(logging.getLogger(name))


def get_pulsesync_logger(component: str) -> StructuredLogger:
    """Logger named `pulsesync.<component>`."""
    return get_logger(f"pulsesync.{component}")


def _result_fields(result: Any) -> Dict[str, Any]:
    # drivers return objects carrying RunMetrics; sweeps carry rows
    metrics = getattr(result, 'metrics', None)
    if metrics is not None and hasattr(metrics, 'messages_total'):
        return {'messages': metrics.messages_total, 'normalized_time': jsonable(metrics.normalized_time)}
    rows = getattr(result, 'rows', None)
    if rows is not None:
        return {'rows': len(rows)}
    return {}


def timed(logger: StructuredLogger, operation: str):
    """Log wall-clock duration and outcome of each call, plus message/time totals of the result."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                logger.error(f"{operation} failed", operation=operation, status='error', error=str(e),
                             duration_ms=round((time.perf_counter() - start) * 1000, 2))
                raise
            logger.info(f"{operation} completed", operation=operation, status='success',
                        duration_ms=round((time.perf_counter() - start) * 1000, 2), **_result_fields(result))
            return result
        return wrapper
    return decorator


def configure_structured_logging(level: int = logging.WARNING, json_output: bool = False,
                                 log_file: Optional[str] = None) -> None:
    """Replace root handlers with a stderr handler (and optionally a file handler)."""
    root = logging.getLogger()
    root.setLevel(level)
    for handler in root.handlers[:]:
        root.removeHandler(handler)

    formatter = JSONFormatter() if json_output else RunFieldsFormatter()
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    for handler in handlers:
        handler.setFormatter(formatter)
        root.addHandler(handler)
