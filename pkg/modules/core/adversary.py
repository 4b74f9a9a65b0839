"""
Adversarial delay schedules for the asynchronous runtime.

Delays are integer ticks in [1, TICKS_PER_TAU]; every adversary is a
deterministic function of its spec and the injection history it has seen.
"""

import hashlib
import logging
import random
from dataclasses import dataclass
from typing import Dict, FrozenSet, Optional, Tuple

from .constants import ADVERSARY_KINDS, DEFAULT_EDGE_BIAS_EPSILON, TICKS_PER_TAU
from .errors import ConfigError

logger = logging.getLogger(__name__)

# Window over which lifo-queue delays decrease with injection order
_LIFO_WINDOW = 64


@dataclass(frozen=True)
class AdversarySpec:
    kind: str = 'max-delay'
    seed: int = 0
    # edge-biased: explicit slow edges, or a seeded fraction of all edges
    slow_edges: Optional[FrozenSet[Tuple[int, int]]] = None
    slow_fraction: float = 0.5
    epsilon: float = DEFAULT_EDGE_BIAS_EPSILON

    def __post_init__(self):
        if self.kind not in ADVERSARY_KINDS:
            raise ConfigError(f"unknown adversary {self.kind!r}; choose from {', '.join(ADVERSARY_KINDS)}")
        if not 0 < self.epsilon <= 1:
            raise ConfigError("adversary epsilon must lie in (0, 1]")

    def __str__(self) -> str:
        return f"{self.kind}:{self.seed}"


def parse_adversary_spec(text: str, epsilon: float = DEFAULT_EDGE_BIAS_EPSILON) -> AdversarySpec:
    """Parse `kind[:seed]`."""
    parts = text.strip().split(':')
    if not parts[0] or len(parts) > 2:
        raise ConfigError(f"adversary spec {text!r} must look like kind[:seed]")
    try:
        seed = int(parts[1]) if len(parts) == 2 else 0
    except ValueError as e:
        raise ConfigError(f"adversary spec {text!r}: seed must be an integer") from e
    return AdversarySpec(kind=parts[0], seed=seed, epsilon=epsilon)


class Adversary:
    """Stateful delay oracle built from an AdversarySpec for one run."""

    def __init__(self, spec: AdversarySpec):
        self.spec = spec
        self._rng = random.Random(spec.seed)
        self._injections = 0
        self._fast = max(1, int(round(spec.epsilon * TICKS_PER_TAU)))
        self._slow_cache: Dict[Tuple[int, int], bool] = {}

    def _is_slow(self, u: int, v: int) -> bool:
        key = (u, v) if u < v else (v, u)
        if self.spec.slow_edges is not None:
            return key in self.spec.slow_edges
        cached = self._slow_cache.get(key)
        if cached is None:
            digest = hashlib.sha256(f"{self.spec.seed}:{key[0]}:{key[1]}".encode()).digest()
            cached = int.from_bytes(digest[:4], 'big') / 2 ** 32 < self.spec.slow_fraction
            self._slow_cache[key] = cached
        return cached

    def delay(self, src: int, dst: int, kind: str, tag, stage: int) -> int:
        """Ticks in [1, TICKS_PER_TAU] for the envelope just injected."""
        self._injections += 1
        k = self.spec.kind
        if k == 'max-delay':
            return TICKS_PER_TAU
        if k == 'uniform-random':
            return self._rng.randint(1, TICKS_PER_TAU)
        if k == 'edge-biased':
            return TICKS_PER_TAU if self._is_slow(src, dst) else self._fast
        # lifo-queue: later injections get shorter delays and overtake earlier ones
        step = TICKS_PER_TAU // _LIFO_WINDOW
        return TICKS_PER_TAU - step * (self._injections % _LIFO_WINDOW)


def adversary_delay(adversary: Adversary, src: int, dst: int, kind: str = 'algorithm',
                    tag=('default',), stage: int = 0) -> float:
    """Delay in units of tau for one freshly injected envelope."""
    return adversary.delay(src, dst, kind, tag, stage) / TICKS_PER_TAU
