"""
Asynchronous cover construction.

The decomposition's two distributed steps run as real asynchronous
executions: the labelled BFS is a staged BFS on the cover layers built so
far, and proposal counting is a convergecast per active cluster over its
Steiner tree extended by the proposers' BFS paths. Both return exactly what
the centralized steps return, so the resulting cover equals the one
build_cover_sync produces; the message and time cost is the simulated one.
The base layers the staged BFS needs are built the same way, with both
steps run as synchronous programs under the alpha-synchronizer.
Once the cover is built, a convergecast and broadcast on every cluster tree
tells each node that all the trees through it are in place.
"""

import logging
from typing import Dict, Iterable, List, Mapping, Optional, Set, Tuple

from ..apps.programs import flood_bfs_factory
from ..core.adversary import AdversarySpec
from ..core.constants import DEFAULT_EVENT_CAP, DEFAULT_RADIUS_SHIFT
from ..core.errors import CoverError
from ..core.events import EventBus
from ..core.graph import NetworkGraph
from ..core.runtime import NodeContext, RunMetrics, run_async
from ..core.sync_runtime import PulseContext, PulseProgram, SyncMessage
from ..protocols.aggregation import AggregationNode, TreeAggregator, combine_and, combine_fields, combine_sum
from ..protocols.alpha import alpha_synchronize
from ..protocols.bfs import staged_bfs
from .cluster import ClusterTree, LayeredCover, SparseCover
from .construction import build_cover_sync, spans, widen
from .decomposition import ConstructionCost, Reach, StepRunner
from .verify import verify_layered

logger = logging.getLogger(__name__)


def _extend_trees(trees: Mapping[int, Dict[int, Optional[int]]], proposals: Mapping[int, List[int]],
                  reach: Mapping[int, Reach]) -> Dict[int, ClusterTree]:
    """Each active cluster's Steiner tree plus its proposers' BFS paths back into it."""
    extended: Dict[int, ClusterTree] = {}
    for label, tree in trees.items():
        parent = dict(tree)
        for u in proposals.get(label, ()):
            w = u
            while w not in parent:
                parent[w] = reach[w].parent
                w = reach[w].parent
        extended[label] = ClusterTree(label, label, parent, frozenset(parent))
    return extended


class _CountNode(AggregationNode):
    def __init__(self):
        super().__init__()
        self.initial: List[Tuple[TreeAggregator, Tuple[int, int]]] = []

    def on_start(self, ctx: NodeContext) -> None:
        for agg, value in self.initial:
            agg.contribute(ctx, value)


class ReadyNode(AggregationNode):
    """Outputs True once every cluster tree through the node has finished its convergecast and broadcast."""

    def __init__(self, v: int, cover: SparseCover):
        super().__init__()
        for c in cover.trees_at(v):
            self.add_aggregator(TreeAggregator(('ready', c.cid), c, v, combine_and, 0, self._on_result))
        self.pending = len(self.aggregators)

    def on_start(self, ctx: NodeContext) -> None:
        if not self.pending:
            ctx.output(True)
        for agg in list(self.aggregators.values()):
            agg.contribute(ctx, True)

    def _on_result(self, ctx: NodeContext, agg: TreeAggregator, result: bool) -> None:
        self.pending -= 1
        if not self.pending:
            ctx.output(result)


def announce_cover(g: NetworkGraph, cover: SparseCover, adversary: Optional[AdversarySpec] = None,
                   event_cap: int = DEFAULT_EVENT_CAP, bus: Optional[EventBus] = None,
                   active: Optional[Iterable[int]] = None) -> RunMetrics:
    """Run the completion broadcast of `cover`; every node outputs True when its trees are done."""
    return run_async(g, lambda v, nbrs: ReadyNode(v, cover), adversary, event_cap, bus=bus, active=active)


class SimulatedSteps(StepRunner):
    """StepRunner whose steps are asynchronous runs on the existing cover layers."""

    def __init__(self, g: NetworkGraph, within: Optional[Set[int]], layered: LayeredCover,
                 shift: int = DEFAULT_RADIUS_SHIFT, adversary: Optional[AdversarySpec] = None,
                 event_cap: int = DEFAULT_EVENT_CAP, bus: Optional[EventBus] = None):
        super().__init__(g, within)
        self.layered = layered
        self.shift = shift
        self.adversary = adversary
        self.event_cap = event_cap
        self.bus = bus
        self.metrics = RunMetrics()
        self.exponent = layered.top - shift
        if self.exponent < 0:
            raise CoverError(f"asynchronous construction needs cover layers up to {shift}, "
                             f"have up to {layered.top}")

    def reach(self, sources: Mapping[int, int], depth: int) -> Dict[int, Reach]:
        step = 1 << self.exponent
        stages = max(1, -(-depth // step))
        result = staged_bfs(self.g, sources.keys(), self.exponent, stages, self.layered, limit=depth,
                            shift=self.shift, adversary=self.adversary, event_cap=self.event_cap,
                            bus=self.bus, active=self.within, labels=sources)
        self.metrics.absorb(result.metrics)
        return {v: Reach(int(dist), label, parent) for v, (dist, parent, label) in result.outputs.items()
                if label is not None}

    def count(self, trees: Mapping[int, Dict[int, Optional[int]]], members: Mapping[int, Set[int]],
              proposals: Mapping[int, List[int]], reach: Mapping[int, Reach]) -> Dict[int, Tuple[int, int]]:
        extended = _extend_trees(trees, proposals, reach)
        proposed = {label: set(proposals.get(label, ())) for label in trees}
        results: Dict[int, Tuple[int, int]] = {}

        def record(ctx, agg, result):
            if agg.is_root:
                results[agg.tree.cid] = result

        def factory(v, nbrs):
            node = _CountNode()
            for label, tree in extended.items():
                if v in tree.parent:
                    agg = node.add_aggregator(TreeAggregator(('count', label), tree, v,
                                                             combine_fields(combine_sum, combine_sum),
                                                             0, record))
                    node.initial.append((agg, (int(v in members[label]), int(v in proposed[label]))))
            return node

        self.metrics.absorb(run_async(self.g, factory, self.adversary, self.event_cap, bus=self.bus,
                                      active=self.within))
        return results


def build_cover_async(g: NetworkGraph, d: int, layered: LayeredCover, nodes: Optional[Iterable[int]] = None,
                      shift: int = DEFAULT_RADIUS_SHIFT, adversary: Optional[AdversarySpec] = None,
                      event_cap: int = DEFAULT_EVENT_CAP,
                      bus: Optional[EventBus] = None) -> Tuple[SparseCover, RunMetrics]:
    """Sparse d-cover built by asynchronous runs over `layered`; returns it with the runs' metrics.

    `layered` must pass verification on `nodes`. The returned metrics end
    with the completion broadcast, so their outputs are each node's ready
    signal.
    """
    verify_layered(g, layered, layered.top, nodes)
    within = None if nodes is None else set(nodes)
    steps = SimulatedSteps(g, within, layered, shift, adversary, event_cap, bus)
    cover = build_cover_sync(g, d, within, ConstructionCost(), steps)
    ready = announce_cover(g, cover, adversary, event_cap, bus, within)
    steps.metrics.absorb(ready, take_outputs=True)
    steps.metrics.extra['ready_nodes'] = sum(1 for ok in ready.outputs.values() if ok)
    logger.debug(f"async {d}-cover: {steps.metrics.messages_total} messages in {steps.metrics.runs} runs")
    return cover, steps.metrics


def extend_layer_async(g: NetworkGraph, layered: LayeredCover, j: int, nodes: Set[int],
                       shift: int = DEFAULT_RADIUS_SHIFT, adversary: Optional[AdversarySpec] = None,
                       event_cap: int = DEFAULT_EVENT_CAP, bus: Optional[EventBus] = None) -> RunMetrics:
    """Add the 2^j layer to `layered`, built asynchronously unless the layer below already spans `nodes`."""
    below = layered.layers.get(j - 1)
    whole = spans(below, nodes) if below is not None else None
    if whole is not None:
        layered.add(j, widen(whole, 1 << j))
        return RunMetrics()
    cover, metrics = build_cover_async(g, 1 << j, layered, None if len(nodes) == g.n else nodes, shift,
                                       adversary, event_cap, bus)
    layered.add(j, cover)
    return metrics


# ----------------------------------------------------------------------
# Base layers under the alpha-synchronizer
# ----------------------------------------------------------------------

class TreeCount(PulseProgram):
    """Sums (member, proposal) counts up every labelled tree through the node; roots record the totals."""

    def __init__(self, v: int, shares: Mapping[int, Tuple[Optional[int], Set[int], Tuple[int, int]]],
                 results: Dict[int, Tuple[int, int]]):
        self.v = v
        self.parent = {label: parent for label, (parent, _, _) in shares.items()}
        self.waiting = {label: set(children) for label, (_, children, _) in shares.items()}
        self.acc = {label: value for label, (_, _, value) in shares.items()}
        self.results = results

    def on_start(self, ctx: PulseContext) -> None:
        self._advance(ctx)

    def on_pulse(self, ctx: PulseContext, received: List[SyncMessage], sent: List[SyncMessage]) -> None:
        for m in received:
            label = m.tag[1]
            self.waiting[label].discard(m.src)
            members, proposals = self.acc[label]
            self.acc[label] = (members + m.payload[0], proposals + m.payload[1])
        self._advance(ctx)

    def _advance(self, ctx: PulseContext) -> None:
        for label in [label for label, waiting in self.waiting.items() if not waiting]:
            del self.waiting[label]
            if self.parent[label] is None:
                self.results[label] = self.acc[label]
            else:
                ctx.send(self.parent[label], self.acc[label], ('count', label))


class AlphaSteps(StepRunner):
    """StepRunner whose steps are PulsePrograms run under the alpha-synchronizer."""

    def __init__(self, g: NetworkGraph, within: Optional[Set[int]], adversary: Optional[AdversarySpec] = None,
                 event_cap: int = DEFAULT_EVENT_CAP, bus: Optional[EventBus] = None):
        super().__init__(g, within)
        self.adversary = adversary
        self.event_cap = event_cap
        self.bus = bus
        self.metrics = RunMetrics()

    def reach(self, sources: Mapping[int, int], depth: int) -> Dict[int, Reach]:
        run = alpha_synchronize(self.g, flood_bfs_factory(sources, prefer_label=True), depth, self.adversary,
                                self.event_cap, bus=self.bus, active=self.within)
        self.metrics.absorb(run.metrics)
        return {v: Reach(int(dist), label, parent) for v, (dist, parent, label) in run.metrics.outputs.items()}

    def count(self, trees: Mapping[int, Dict[int, Optional[int]]], members: Mapping[int, Set[int]],
              proposals: Mapping[int, List[int]], reach: Mapping[int, Reach]) -> Dict[int, Tuple[int, int]]:
        extended = _extend_trees(trees, proposals, reach)
        shares: Dict[int, Dict[int, Tuple[Optional[int], Set[int], Tuple[int, int]]]] = {}
        for label, tree in extended.items():
            proposed = set(proposals.get(label, ()))
            for v, parent in tree.parent.items():
                value = (int(v in members[label]), int(v in proposed))
                shares.setdefault(v, {})[label] = (parent, set(tree.children.get(v, ())), value)
        results: Dict[int, Tuple[int, int]] = {}
        horizon = max((tree.depth for tree in extended.values()), default=0)
        run = alpha_synchronize(self.g, lambda v, nbrs: TreeCount(v, shares.get(v, {}), results), horizon,
                                self.adversary, self.event_cap, bus=self.bus, active=self.within)
        self.metrics.absorb(run.metrics)
        return results


def build_base_layers_alpha(g: NetworkGraph, top: int, nodes: Optional[Iterable[int]] = None,
                            adversary: Optional[AdversarySpec] = None, event_cap: int = DEFAULT_EVENT_CAP,
                            bus: Optional[EventBus] = None) -> Tuple[LayeredCover, RunMetrics]:
    """Sparse 2^j-covers for j = 0..top built by alpha-synchronized runs, with their measured metrics."""
    node_set = set(range(g.n)) if nodes is None else set(nodes)
    within = None if len(node_set) == g.n else node_set
    layered = LayeredCover()
    metrics = RunMetrics()
    for j in range(top + 1):
        below = layered.layers.get(j - 1)
        whole = spans(below, node_set) if below is not None else None
        if whole is not None:
            layered.add(j, widen(whole, 1 << j))
            continue
        steps = AlphaSteps(g, within, adversary, event_cap, bus)
        layered.add(j, build_cover_sync(g, 1 << j, within, ConstructionCost(), steps))
        metrics.absorb(steps.metrics)
    logger.debug(f"alpha base layers 0..{top}: {metrics.messages_total} messages in {metrics.runs} runs")
    return layered, metrics
