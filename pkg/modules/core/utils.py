"""
Self-contained helpers shared across PulseSync: payload digests, canonical
JSON, word counting for the soft payload-size check and timestamps.
"""
import hashlib
import json
import math
from datetime import datetime, timezone
from typing import Any, Iterable


def utc_now() -> datetime:
    """UTC-now timestamp as a naive datetime."""
    return datetime.now(timezone.utc).replace(tzinfo=None)


# =============================================
# PAYLOAD HELPERS
# =============================================


def jsonable(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted((jsonable(v) for v in value), key=repr)
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in sorted(value.items(), key=lambda kv: repr(kv[0]))}
    if isinstance(value, float) and math.isinf(value):
        return 'inf'
    return value


def canonical_json(value: Any) -> str:
    """Stable JSON rendering: sorted keys, no whitespace variance, inf as a string."""
    return json.dumps(jsonable(value), sort_keys=True, separators=(',', ':'))


def payload_digest(payload: Any, length: int = 12) -> str:
    """Short sha256 digest of a payload's repr, used in trace lines."""
    return hashlib.sha256(repr(payload).encode('utf-8')).hexdigest()[:length]


def lines_digest(lines: Iterable[str]) -> str:
    """sha256 over newline-joined lines; used to compare event logs."""
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode('utf-8'))
        h.update(b'\n')
    return h.hexdigest()


def count_words(payload: Any) -> int:
    """Number of scalar words in a (nested) payload."""
    if isinstance(payload, (list, tuple, set, frozenset)):
        return sum(count_words(p) for p in payload)
    if isinstance(payload, dict):
        return sum(count_words(k) + count_words(v) for k, v in payload.items())
    return 1


def ceil_log2(x: int) -> int:
    """Smallest t with 2^t >= x (0 for x <= 1)."""
    return 0 if x <= 1 else (x - 1).bit_length()


def log2_at_least_one(n: int) -> float:
    """log2(n) clamped below at 1, for normalizing measured constants."""
    return max(1.0, math.log2(max(n, 1)))
