"""BFS tree application: distances and parents from a source set, with a validity check."""

from typing import Dict, Iterable, Optional

from ..core.adversary import AdversarySpec
from ..core.graph import INF, NetworkGraph
from ..protocols.bfs import BfsResult
from ..protocols.complete import complete_bfs_multi


def bfs_app(g: NetworkGraph, sources: Iterable[int], adversary: Optional[AdversarySpec] = None,
            **kwargs) -> BfsResult:
    return complete_bfs_multi(g, sources, adversary=adversary, **kwargs)


def tree_violations(g: NetworkGraph, outputs: Dict[int, tuple]) -> Dict[int, str]:
    """Nodes whose (dist, parent) do not form a shortest-path forest, with the reason."""
    bad: Dict[int, str] = {}
    for v, (dist, parent) in outputs.items():
        if dist == INF:
            continue
        if parent is None:
            if dist != 0:
                bad[v] = f"no parent at distance {dist}"
        elif not g.has_edge(v, parent):
            bad[v] = f"parent {parent} is not a neighbor"
        elif outputs[parent][0] != dist - 1:
            bad[v] = f"parent {parent} at distance {outputs[parent][0]}, expected {dist - 1}"
    return bad
