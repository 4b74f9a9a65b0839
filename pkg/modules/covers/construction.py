"""
Sparse d-cover construction and layered covers.

A d-cover is obtained from a (2d+1)-separated decomposition by growing every
cluster to the d-ball around it; same-color clusters stay disjoint, so each
node sits in at most one cluster per color. A node's home cluster is the
grown cluster of its own decomposition cluster, which holds its whole d-ball.
"""

import logging
from collections import Counter
from typing import Dict, Iterable, List, Optional, Set, Tuple

from ..core.constants import DEFAULT_RADIUS_SHIFT
from ..core.graph import NetworkGraph
from .cluster import ClusterTree, LayeredCover, SparseCover
from .decomposition import ConstructionCost, StepRunner, decompose

logger = logging.getLogger(__name__)


def _grow(c: ClusterTree, reach, d: int) -> ClusterTree:
    parent = dict(c.parent)
    for w in sorted(reach):
        x = w
        while x not in parent:
            parent[x] = reach[x].parent
            x = reach[x].parent
    return ClusterTree(c.cid, c.root, parent, frozenset(reach), d)


def spans(cover: SparseCover, nodes: Iterable[int]) -> Optional[ClusterTree]:
    """A cluster of `cover` whose members are all of `nodes`, if any."""
    nodes = frozenset(nodes)
    for c in cover.clusters:
        if c.members >= nodes:
            return c
    return None


def widen(whole: ClusterTree, d: int) -> SparseCover:
    """A cluster holding every node is a d-cover on its own, for any d."""
    c = ClusterTree(whole.cid, whole.root, whole.parent, whole.members, d)
    return SparseCover(d, [c], {v: c.cid for v in c.members})


def build_cover_sync(g: NetworkGraph, d: int, nodes: Optional[Iterable[int]] = None,
                     cost: Optional[ConstructionCost] = None,
                     steps: Optional[StepRunner] = None) -> SparseCover:
    """Sparse d-cover of `nodes` (default: all), clusters grown from a (2d+1)-separated decomposition."""
    if d < 1:
        raise ValueError("cover radius must be at least 1")
    within = None if nodes is None else set(nodes)
    steps = steps or StepRunner(g, within)
    cost = cost if cost is not None else ConstructionCost()
    dec = decompose(g, 2 * d + 1, within, cost, steps)

    clusters: List[ClusterTree] = []
    home: Dict[int, int] = {}
    for color in dec.colors:
        sources = {v: c.cid for c in color for v in c.members}
        reach = steps.reach(sources, d)
        by_label: Dict[int, Dict] = {}
        for w, r in reach.items():
            by_label.setdefault(r.label, {})[w] = r
        for c in color:
            grown = _grow(c, by_label.get(c.cid, {}), d)
            clusters.append(grown)
            for v in c.members:
                home[v] = c.cid
            cost.messages += 2 * len(grown.parent)
        cost.rounds += d
        cost.steps += 1
    logger.debug(f"{d}-cover: {len(clusters)} clusters over {len(home)} nodes")
    return SparseCover(d, clusters, home)


def build_layered_cover(g: NetworkGraph, top: int, nodes: Optional[Iterable[int]] = None,
                        shift: int = DEFAULT_RADIUS_SHIFT,
                        layered: Optional[LayeredCover] = None) -> Tuple[LayeredCover, Counter]:
    """Sparse 2^j-covers for j = 0..top, with the modeled cost of building them.

    Layers up to shift + 1 are charged as run under the alpha-synchronizer:
    every simulated round also costs a safety message in each direction of
    every edge.
    """
    layered = layered if layered is not None else LayeredCover()
    modeled: Counter = Counter()
    node_set = set(range(g.n)) if nodes is None else set(nodes)
    edge_count = sum(1 for u, v in g.edges() if u in node_set and v in node_set)
    for j in range(top + 1):
        if layered.has(j):
            continue
        layered.add(j, extend_layer(g, layered, j, node_set, modeled, alpha=j <= shift + 1,
                                    edge_count=edge_count))
    return layered, modeled


def extend_layer(g: NetworkGraph, layered: LayeredCover, j: int, nodes: Set[int], modeled: Counter,
                 alpha: bool = False, edge_count: Optional[int] = None) -> SparseCover:
    """Build the 2^j layer, reusing the layer below when it already has an all-nodes cluster."""
    below = layered.layers.get(j - 1)
    whole = spans(below, nodes) if below is not None else None
    if whole is not None:
        return widen(whole, 1 << j)
    cost = ConstructionCost()
    cover = build_cover_sync(g, 1 << j, None if len(nodes) == g.n else nodes, cost)
    modeled.update(cost.as_counter('cover'))
    if alpha:
        edges = edge_count if edge_count is not None else g.m
        modeled['alpha_cover_messages'] += cost.rounds * 2 * edges
    return cover
