"""
Deterministic k-separated weak-diameter network decomposition with Steiner trees.

Each color class is built by bit-phases over cluster labels (initially the
node ids): in phase i, clusters whose label has bit i clear are blue. Every
step, active blue clusters run a BFS to depth k; a red node reached by it
proposes to the cluster whose BFS reached it first (smallest (distance,
label, sender)). A blue cluster with more than |A|/(2b) proposals absorbs
them and extends its Steiner tree along the BFS paths; otherwise it kills
the proposers and stops growing for the rest of the phase. Killed nodes
stay in trees as relays.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Set, Tuple

from ..core.errors import CoverError
from ..core.graph import NetworkGraph
from ..core.utils import ceil_log2
from .cluster import ClusterTree, NetworkDecomposition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Reach:
    dist: int
    label: int
    parent: Optional[int]


@dataclass
class ConstructionCost:
    """CONGEST rounds and messages a synchronous construction would take."""
    rounds: int = 0
    messages: int = 0
    steps: int = 0

    def add(self, other: 'ConstructionCost') -> 'ConstructionCost':
        self.rounds += other.rounds
        self.messages += other.messages
        self.steps += other.steps
        return self

    def as_counter(self, prefix: str) -> Counter:
        return Counter({f"{prefix}_rounds": self.rounds, f"{prefix}_messages": self.messages,
                        f"{prefix}_steps": self.steps})


def labelled_bfs(g: NetworkGraph, sources: Mapping[int, int], depth: int,
                 within: Optional[Set[int]] = None) -> Dict[int, Reach]:
    """Multi-source BFS to `depth`; each reached node keeps the smallest (label, sender) of the previous layer."""
    reached: Dict[int, Reach] = {s: Reach(0, label, None) for s, label in sources.items()}
    frontier = sorted(sources)
    d = 0
    while frontier and d < depth:
        d += 1
        offers: Dict[int, Tuple[int, int]] = {}
        for u in frontier:
            label = reached[u].label
            for w in g.neighbors(u):
                if w in reached or (within is not None and w not in within):
                    continue
                offer = (label, u)
                if w not in offers or offer < offers[w]:
                    offers[w] = offer
        for w, (label, sender) in offers.items():
            reached[w] = Reach(d, label, sender)
        frontier = sorted(offers)
    return reached


class StepRunner:
    """Executes the two distributed steps of the construction: labelled BFS and proposal counting.

    This implementation computes both centrally; the asynchronous cover
    builder substitutes simulated runs that must return the same values.
    """

    def __init__(self, g: NetworkGraph, within: Optional[Set[int]] = None):
        self.g = g
        self.within = within

    def reach(self, sources: Mapping[int, int], depth: int) -> Dict[int, Reach]:
        return labelled_bfs(self.g, sources, depth, self.within)

    def count(self, trees: Mapping[int, Dict[int, Optional[int]]], members: Mapping[int, Set[int]],
              proposals: Mapping[int, List[int]], reach: Mapping[int, Reach]) -> Dict[int, Tuple[int, int]]:
        """label -> (member count, proposal count) for every active label in `trees`."""
        return {label: (len(members[label]), len(proposals.get(label, ()))) for label in trees}


def _prune(parent: Dict[int, Optional[int]], members: Set[int]) -> Dict[int, Optional[int]]:
    """Drop relay leaves repeatedly so every leaf is a member."""
    parent = dict(parent)
    child_count: Counter = Counter(p for p in parent.values() if p is not None)
    stack = [v for v in parent if child_count[v] == 0 and v not in members]
    while stack:
        v = stack.pop()
        if v not in parent or parent[v] is None:
            continue
        p = parent.pop(v)
        child_count[p] -= 1
        if child_count[p] == 0 and p not in members:
            stack.append(p)
    return parent


def id_bits(n: int) -> int:
    return max(1, (n - 1).bit_length())


def step_budget(n: int) -> int:
    b = id_bits(n)
    return 10 * b * max(1, ceil_log2(n))


def decompose_one_color(g: NetworkGraph, living: Iterable[int], k: int,
                        within: Optional[Set[int]] = None,
                        cost: Optional[ConstructionCost] = None,
                        steps: Optional[StepRunner] = None) -> Tuple[Set[int], List[ClusterTree]]:
    """Cluster at least half of `living` into k-separated clusters with Steiner trees.

    Returns (clustered nodes, clusters); cluster ids are the cluster labels.
    """
    if k < 1:
        raise CoverError("separation k must be at least 1")
    living = set(living)
    if not living:
        raise CoverError("decompose_one_color needs a nonempty living set")
    b = id_bits(g.n)
    budget = step_budget(g.n)
    cost = cost if cost is not None else ConstructionCost()
    steps = steps or StepRunner(g, within)

    cluster_of: Dict[int, int] = {v: v for v in living}
    members: Dict[int, Set[int]] = {v: {v} for v in living}
    trees: Dict[int, Dict[int, Optional[int]]] = {v: {v: None} for v in living}
    edge_count = g.m if within is None else sum(1 for u, v in g.edges() if u in within and v in within)

    for phase in range(b):
        mask = 1 << phase
        active = {label for label, mem in members.items() if mem and not label & mask}
        for _ in range(budget):
            if not active:
                break
            sources = {v: label for label in active for v in members[label]}
            reach = steps.reach(sources, k)
            proposals: Dict[int, List[int]] = {}
            for u, r in reach.items():
                label = cluster_of.get(u)
                if label is not None and label & mask and r.dist > 0:
                    proposals.setdefault(r.label, []).append(u)

            cost.steps += 1
            cost.rounds += k + 2 * max((len(trees[label]) for label in active), default=0)
            cost.messages += 2 * edge_count + 2 * sum(len(trees[label]) for label in active)

            counts = steps.count({label: trees[label] for label in active}, members, proposals, reach)
            for label in sorted(active):
                props = sorted(proposals.get(label, ()))
                size, proposed = counts[label]
                if proposed * 2 * b > size:
                    tree = trees[label]
                    for u in props:
                        members[cluster_of[u]].discard(u)
                        cluster_of[u] = label
                        members[label].add(u)
                        w = u
                        while w not in tree:
                            tree[w] = reach[w].parent
                            w = reach[w].parent
                else:
                    for u in props:
                        members[cluster_of.pop(u)].discard(u)
                    active.discard(label)
        else:
            if active:
                logger.warning(f"phase {phase}: step budget {budget} exhausted with {len(active)} active clusters")

    clustered = set(cluster_of)
    clusters = []
    for label in sorted(members):
        if members[label]:
            parent = _prune(trees[label], members[label])
            clusters.append(ClusterTree(label, label, parent, frozenset(members[label])))
    logger.debug(f"color clustered {len(clustered)}/{len(living)} nodes in {len(clusters)} clusters")
    return clustered, clusters


def decompose(g: NetworkGraph, k: int, nodes: Optional[Iterable[int]] = None,
              cost: Optional[ConstructionCost] = None, steps: Optional[StepRunner] = None) -> NetworkDecomposition:
    """Partition `nodes` (default: all) into color classes of k-separated clusters."""
    within = None if nodes is None else set(nodes)
    living = set(range(g.n)) if nodes is None else set(nodes)
    colors: List[List[ClusterTree]] = []
    next_cid = 0
    while living:
        clustered, clusters = decompose_one_color(g, living, k, within, cost, steps)
        if not clustered:
            raise CoverError(f"no progress clustering {len(living)} living nodes")
        renumbered = []
        for c in clusters:
            renumbered.append(ClusterTree(next_cid, c.root, c.parent, c.members, c.radius))
            next_cid += 1
        colors.append(renumbered)
        living -= clustered
    logger.debug(f"decomposition with separation {k}: {len(colors)} colors, {next_cid} clusters")
    return NetworkDecomposition(k, colors)
