"""
Experiment configuration.

An ExperimentConfig fully determines a run: graph, algorithm, adversary,
seed and driver options. Defaults not given on the command line come from
the SettingsManager (built-in defaults, settings file, environment).
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..core.adversary import AdversarySpec, parse_adversary_spec
from ..core.constants import (
    ALGORITHMS, COVER_MODES, DEFAULT_EDGE_BIAS_EPSILON, DEFAULT_EVENT_CAP, DEFAULT_RADIUS_SHIFT,
    TERMINATION_APPROACHES,
)
from ..core.errors import ConfigError
from ..core.graph import NetworkGraph, generate, parse_graph_spec, read_edge_list

PROGRAMS = ('flood', 'min-id', 'boruvka')
SYNC_MODES = ('known-T', 'unknown-T')


@dataclass
class ExperimentConfig:
    graph: str = 'path:16:1'
    algorithm: str = 'bfs'
    adversary: str = 'max-delay'
    seed: int = 0
    termination: str = 'approach2'
    sources: List[int] = field(default_factory=lambda: [0])
    threshold: Optional[int] = None
    cover_mode: str = 'sync'
    sync_mode: str = 'unknown-T'
    program: str = 'flood'
    baseline: Optional[str] = None
    event_cap: int = DEFAULT_EVENT_CAP
    radius_shift: int = DEFAULT_RADIUS_SHIFT
    edge_biased_epsilon: float = DEFAULT_EDGE_BIAS_EPSILON
    edges_path: Optional[str] = None

    @classmethod
    def from_settings(cls, settings: Dict[str, Any], **overrides) -> 'ExperimentConfig':
        base = {
            'adversary': settings.get('default_adversary', 'max-delay'),
            'cover_mode': settings['cover_mode'],
            'event_cap': int(settings['event_cap']),
            'radius_shift': int(settings['radius_shift']),
            'edge_biased_epsilon': float(settings['edge_biased_epsilon']),
        }
        base.update({k: v for k, v in overrides.items() if v is not None})
        config = cls(**base)
        config.validate()
        return config

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.termination not in TERMINATION_APPROACHES:
            raise ConfigError(f"unknown termination approach {self.termination!r}")
        if self.termination == 'fixed-t' and self.threshold is None:
            raise ConfigError("fixed-t termination needs a threshold exponent")
        if self.threshold is not None and self.threshold < 0:
            raise ConfigError("threshold exponent must be non-negative")
        if self.cover_mode not in COVER_MODES:
            raise ConfigError(f"cover mode must be one of {COVER_MODES}")
        if self.sync_mode not in SYNC_MODES:
            raise ConfigError(f"synchronizer mode must be one of {SYNC_MODES}")
        if self.program not in PROGRAMS:
            raise ConfigError(f"program must be one of {PROGRAMS}")
        if self.baseline not in (None, 'alpha'):
            raise ConfigError(f"unknown baseline {self.baseline!r}")
        if not self.sources:
            raise ConfigError("at least one source is needed")
        if self.event_cap < 1:
            raise ConfigError("event cap must be positive")
        self.adversary_spec()

    def adversary_spec(self) -> AdversarySpec:
        return parse_adversary_spec(self.adversary, self.edge_biased_epsilon)

    def load_graph(self) -> NetworkGraph:
        if self.edges_path:
            return read_edge_list(Path(self.edges_path))
        return generate(parse_graph_spec(self.graph))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def parse_int_list(text: str, what: str) -> Tuple[int, ...]:
    """Comma-separated integers, e.g. `64,128,256`."""
    try:
        values = tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError as e:
        raise ConfigError(f"{what} must be comma-separated integers, got {text!r}") from e
    if not values:
        raise ConfigError(f"{what} must not be empty")
    return values
