"""Minimum spanning tree: synchronous Borůvka through the synchronizer, checked against Kruskal."""

from dataclasses import dataclass
from typing import FrozenSet, Optional

from ..core.adversary import AdversarySpec
from ..core.errors import GraphError
from ..core.graph import Edge, NetworkGraph, mst_oracle
from ..core.runtime import RunMetrics
from ..core.structured_logging import get_pulsesync_logger
from ..protocols.synchronizer import synchronize
from .programs import boruvka_factory, mst_edges_from_outputs

logger = get_pulsesync_logger('mst')


@dataclass
class MstResult:
    edges: FrozenSet[Edge]
    weight: int
    metrics: RunMetrics
    exact: bool


def mst(g: NetworkGraph, adversary: Optional[AdversarySpec] = None, mode: str = 'unknown-T',
        **kwargs) -> MstResult:
    """Every node outputs its incident MST edges; their union is the tree."""
    if not g.is_weighted:
        raise GraphError("MST needs a graph with distinct edge weights")
    run = synchronize(g, boruvka_factory(g), mode=mode, adversary=adversary, **kwargs)
    edges = mst_edges_from_outputs(run.outputs)
    expected, _ = mst_oracle(g)
    weight = sum(g.weights[e] for e in edges)
    exact = edges == expected
    if not exact:
        logger.warning("MST differs from the oracle", missing=len(expected - edges), extra=len(edges - expected))
    return MstResult(edges, weight, run.metrics, exact)
