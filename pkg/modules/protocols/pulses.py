"""
Pulse arithmetic: level, prev and the pulse sets the gating protocols track.

level(0) is INFINITY, a distinguished value that compares above every
integer, never a sentinel integer.
"""

import math
from functools import lru_cache
from typing import Dict, List, Tuple, Union

from ..core.constants import DEFAULT_RADIUS_SHIFT

INFINITY = math.inf

Level = Union[int, float]


def level(p: int) -> Level:
    """Exponent of the highest power of two dividing p; INFINITY for p = 0."""
    if p < 0:
        raise ValueError(f"pulse must be non-negative, got {p}")
    if p == 0:
        return INFINITY
    return (p & -p).bit_length() - 1


def prev(p: int) -> int:
    """Largest q <= p - 2^level(p) with level(q) = level(p) + 1, or 0 if there is none."""
    if p < 0:
        raise ValueError(f"pulse must be non-negative, got {p}")
    if p == 0:
        return 0
    lv = level(p)
    step = 1 << (lv + 1)
    k = (p - (1 << lv)) // step
    if k % 2 == 0:
        k -= 1
    return max(k, 0) * step


def prev2(p: int) -> int:
    """prev(prev(p)): the pulse whose nodes register for p."""
    return prev(prev(p))


def prev_by_enumeration(p: int) -> int:
    """Reference prev() by scanning every candidate below p."""
    if p == 0:
        return 0
    lv = level(p)
    bound = p - (1 << lv)
    best = 0
    for q in range(1, bound + 1):
        if level(q) == lv + 1:
            best = q
    return best


def registration_radius(p: int, shift: int = DEFAULT_RADIUS_SHIFT) -> int:
    """Radius of the cover whose clusters gate pulse p: 2^(level(p) + shift)."""
    if p <= 0:
        raise ValueError("registration radius is defined for p > 0 only")
    return 1 << registration_layer(p, shift)


def registration_layer(p: int, shift: int = DEFAULT_RADIUS_SHIFT) -> int:
    if p <= 0:
        raise ValueError("registration layer is defined for p > 0 only")
    return int(level(p)) + shift


def max_layer_for(horizon: int, shift: int = DEFAULT_RADIUS_SHIFT) -> int:
    """Highest cover layer any pulse in 1..horizon registers on."""
    if horizon < 1:
        return shift
    return (horizon.bit_length() - 1) + shift


class PulseSchedule:
    """Per-horizon tables: which pulses each pulse registers for, and which it must track.

    A virtual node at pulse q registers for every p with prev2(p) = q. It
    needs safety information for prev(p) and p of those pulses and for every
    x its parent at q - 1 needs reported; tracked(q) is the union, ascending.
    """

    def __init__(self, horizon: int):
        self.horizon = horizon
        self._registrants: Dict[int, List[int]] = {}
        for p in range(1, horizon + 1):
            self._registrants.setdefault(prev2(p), []).append(p)
        self._tracked: List[Tuple[int, ...]] = []
        self._upward: List[frozenset] = []
        for q in range(horizon + 1):
            upward = frozenset(x for x in self._tracked[q - 1] if x > q) if q else frozenset()
            needed = set(upward)
            for p in self.gated_by(q):
                needed.add(p)
                if prev(p) > q:
                    needed.add(prev(p))
            self._tracked.append(tuple(sorted(needed)))
            self._upward.append(upward)

    def gated_by(self, q: int) -> List[int]:
        """Pulses p <= horizon with prev2(p) = q, ascending."""
        return self._registrants.get(q, [])

    def triggered_by(self, q: int, x: int) -> List[int]:
        """Pulses gated at q whose registration starts once x is safe."""
        return [p for p in self.gated_by(q) if prev(p) == x]

    def tracked(self, q: int) -> Tuple[int, ...]:
        return self._tracked[q] if q <= self.horizon else ()

    def reported_upward(self, q: int) -> frozenset:
        """Which of tracked(q) the virtual node at q forwards to its parent at q - 1."""
        return self._upward[q] if q <= self.horizon else frozenset()


@lru_cache(maxsize=64)
def schedule_for(horizon: int) -> PulseSchedule:
    return PulseSchedule(horizon)


def source_pulses(t: int) -> List[int]:
    """Pulses 0 < p <= 2^t gated directly at the sources (prev2(p) = 0)."""
    return [p for p in range(1, (1 << t) + 1) if prev2(p) == 0]
