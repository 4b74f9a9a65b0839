"""
Convergecast/broadcast over cluster trees, and done-with-P notification.

A TreeAggregator is the state one node keeps for one aggregation instance:
it waits for its own contribution and one value from each tree child, sends
the combined value to its tree parent, and at the root turns the total into
a result that is broadcast back down. Relay nodes and non-members
contribute the neutral value at once.

done_convergecast notifies a node once every node within distance d of it
is done: the node's home cluster holds its whole d-ball, and its result
arrives only after every member contributed. The extended variant repeats
this l times, each stage certifying one more d of radius.
"""

import logging
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Tuple

from ..core.adversary import AdversarySpec
from ..core.constants import DEFAULT_EVENT_CAP
from ..core.errors import ProtocolViolation
from ..core.events import EventBus
from ..core.graph import NetworkGraph
from ..core.runtime import Envelope, NodeContext, NodeProgram, RunMetrics, Tag, run_async
from ..covers.cluster import ClusterTree, SparseCover

logger = logging.getLogger(__name__)

Combine = Callable[[Any, Any], Any]
ResultCallback = Callable[[NodeContext, 'TreeAggregator', Any], None]


def combine_and(a, b):
    return a and b


def combine_sum(a, b):
    return a + b


def combine_min(a, b):
    return a if a <= b else b


def combine_fields(*combines: Combine) -> Combine:
    """Field-wise combination of equal-length tuples."""
    def combine(a, b):
        return tuple(f(x, y) for f, x, y in zip(combines, a, b))
    return combine


class TreeAggregator:
    """One node's share of a convergecast + broadcast on one cluster tree."""

    def __init__(self, key: Tag, tree: ClusterTree, node: int, combine: Combine,
                 stage: int = 0, on_result: Optional[ResultCallback] = None):
        self.key = tuple(key)
        self.tag: Tag = ('agg',) + self.key
        self.tree = tree
        self.node = node
        self.parent = tree.parent[node]
        self.children = tree.children.get(node, ())
        self.combine = combine
        self.stage = stage
        self.on_result = on_result
        self._waiting = set(self.children)
        self._acc: Any = None
        self._has_acc = False
        self.contributed = False
        self.sent_up = False
        self.result: Any = None
        self.done = False

    @property
    def is_root(self) -> bool:
        return self.parent is None

    @property
    def is_member(self) -> bool:
        return self.node in self.tree.members

    def _fold(self, value: Any) -> None:
        self._acc = self.combine(self._acc, value) if self._has_acc else value
        self._has_acc = True

    def contribute(self, ctx: NodeContext, value: Any) -> None:
        if self.contributed:
            raise ProtocolViolation(f"contributed twice to aggregation {self.key}", node=self.node)
        self.contributed = True
        self._fold(value)
        self._advance(ctx)

    def handle(self, ctx: NodeContext, envelope: Envelope) -> None:
        kind, value = envelope.payload
        if kind == 'up':
            if envelope.src not in self._waiting:
                raise ProtocolViolation(f"unexpected convergecast value from {envelope.src} in {self.key}",
                                        node=self.node)
            self._waiting.discard(envelope.src)
            self._fold(value)
            self._advance(ctx)
        elif kind == 'down':
            self._deliver(ctx, value)
        else:
            raise ProtocolViolation(f"unknown aggregation message {kind!r}", node=self.node)

    def _advance(self, ctx: NodeContext) -> None:
        if self.sent_up or not self.contributed or self._waiting:
            return
        self.sent_up = True
        if self.is_root:
            self._deliver(ctx, self._acc)
        else:
            ctx.send(self.parent, ('up', self._acc), self.tag, self.stage)

    def _deliver(self, ctx: NodeContext, result: Any) -> None:
        if self.done:
            raise ProtocolViolation(f"second broadcast in aggregation {self.key}", node=self.node)
        self.done = True
        self.result = result
        for c in self.children:
            ctx.send(c, ('down', result), self.tag, self.stage)
        if self.on_result is not None:
            self.on_result(ctx, self, result)


class AggregationNode(NodeProgram):
    """A NodeProgram hosting TreeAggregators, dispatching by tag."""

    def __init__(self):
        self.aggregators: Dict[Tag, TreeAggregator] = {}

    def add_aggregator(self, agg: TreeAggregator) -> TreeAggregator:
        self.aggregators[agg.tag] = agg
        return agg

    def aggregator(self, *key) -> TreeAggregator:
        return self.aggregators[('agg',) + tuple(key)]

    def on_receive(self, ctx: NodeContext, envelope: Envelope) -> None:
        agg = self.aggregators.get(envelope.tag)
        if agg is None:
            raise ProtocolViolation(f"no aggregation instance for tag {envelope.tag}", node=ctx.node_id)
        agg.handle(ctx, envelope)


def run_cluster_aggregation(g: NetworkGraph, cover: SparseCover, values: Callable[[int, ClusterTree], Any],
                            combine: Combine, neutral: Any, key: Tag = ('value',),
                            adversary: Optional[AdversarySpec] = None, event_cap: int = DEFAULT_EVENT_CAP,
                            bus: Optional[EventBus] = None, active: Optional[Iterable[int]] = None,
                            stage: int = 0) -> Tuple[Dict[int, Any], RunMetrics]:
    """Aggregate `values(v, cluster)` over every cluster of `cover`, members only.

    Returns ({cid: result}, metrics); every tree node also learns its
    clusters' results through the broadcast.
    """
    results: Dict[int, Any] = {}

    def record(ctx, agg, result):
        if agg.is_root:
            results[agg.tree.cid] = result

    def factory(v, nbrs):
        node = _OneShotAggregation()
        for c in cover.trees_at(v):
            agg = node.add_aggregator(TreeAggregator(tuple(key) + (c.cid,), c, v, combine, stage, record))
            node.initial.append((agg, values(v, c) if c.is_member(v) else neutral))
        return node

    metrics = run_async(g, factory, adversary, event_cap, bus=bus, active=active)
    return results, metrics


class _OneShotAggregation(AggregationNode):
    def __init__(self):
        super().__init__()
        self.initial: List[Tuple[TreeAggregator, Any]] = []

    def on_start(self, ctx: NodeContext) -> None:
        for agg, value in self.initial:
            agg.contribute(ctx, value)


# ----------------------------------------------------------------------
# Done-with-P notification
# ----------------------------------------------------------------------

class Doneness:
    """When a node becomes done with the process being waited for."""

    def start(self, ctx: NodeContext, mark_done: Callable[[NodeContext], None]) -> None:
        raise NotImplementedError

    def handle(self, ctx: NodeContext, envelope: Envelope, mark_done: Callable[[NodeContext], None]) -> None:
        raise ProtocolViolation(f"unexpected message with tag {envelope.tag}", node=ctx.node_id)


class ImmediateDone(Doneness):
    """Every node is done at time 0."""

    def start(self, ctx, mark_done):
        mark_done(ctx)


WORK_TAG: Tag = ('work',)


class WorkDone(Doneness):
    """Node v is done after work[v] ping/pong round trips with its smallest neighbor."""

    def __init__(self, work: Mapping[int, int]):
        self.work = dict(work)
        self._left: Dict[int, int] = {}

    def start(self, ctx, mark_done):
        left = self.work.get(ctx.node_id, 0)
        self._left[ctx.node_id] = left
        if left <= 0 or not ctx.neighbors:
            mark_done(ctx)
        else:
            ctx.send(min(ctx.neighbors), 'ping', WORK_TAG)

    def handle(self, ctx, envelope, mark_done):
        if envelope.payload == 'ping':
            ctx.send(envelope.src, 'pong', WORK_TAG)
            return
        self._left[ctx.node_id] -= 1
        if self._left[ctx.node_id] == 0:
            mark_done(ctx)
        else:
            ctx.send(envelope.src, 'ping', WORK_TAG)


class DoneNotifyNode(AggregationNode):
    """Runs `stages` rounds of per-cluster convergecast; notified when the home cluster's last stage completes."""

    def __init__(self, v: int, cover: SparseCover, doneness: Doneness, stages: int):
        super().__init__()
        self.v = v
        self.cover = cover
        self.doneness = doneness
        self.stages = stages
        self.home = cover.home_cluster(v).cid
        self.is_done = False
        self.notified = False
        for stage in range(1, stages + 1):
            for c in cover.trees_at(v):
                self.add_aggregator(TreeAggregator(('done', stage, c.cid), c, v, combine_and, stage,
                                                   self._on_result))

    def on_start(self, ctx: NodeContext) -> None:
        for agg in self.aggregators.values():
            if not agg.is_member:
                agg.contribute(ctx, True)
        self.doneness.start(ctx, self.mark_done)

    def on_receive(self, ctx: NodeContext, envelope: Envelope) -> None:
        if envelope.tag == WORK_TAG:
            self.doneness.handle(ctx, envelope, self.mark_done)
        else:
            super().on_receive(ctx, envelope)

    def mark_done(self, ctx: NodeContext) -> None:
        if self.is_done:
            raise ProtocolViolation("reported done twice", node=self.v)
        self.is_done = True
        ctx.publish('done')
        self._enter_stage(ctx, 1)

    def _enter_stage(self, ctx: NodeContext, stage: int) -> None:
        for cid in self.cover.membership.get(self.v, ()):
            self.aggregator('done', stage, cid).contribute(ctx, True)

    def _on_result(self, ctx: NodeContext, agg: TreeAggregator, result: Any) -> None:
        _, stage, cid = agg.key
        if cid != self.home:
            return
        if stage < self.stages:
            self._enter_stage(ctx, stage + 1)
        else:
            self.notified = True
            ctx.publish('notified')
            ctx.output(True)


def done_convergecast_extended(g: NetworkGraph, cover: SparseCover, stages: int,
                               doneness: Optional[Doneness] = None,
                               adversary: Optional[AdversarySpec] = None,
                               event_cap: int = DEFAULT_EVENT_CAP, bus: Optional[EventBus] = None,
                               trace: bool = False,
                               active: Optional[Iterable[int]] = None) -> RunMetrics:
    """Notify each node once its (d * stages)-neighborhood is done; outputs True per notified node."""
    if stages < 1:
        raise ValueError("stage count must be at least 1")
    doneness = doneness or ImmediateDone()
    metrics = run_async(g, lambda v, nbrs: DoneNotifyNode(v, cover, doneness, stages),
                        adversary, event_cap, trace=trace, bus=bus, active=active)
    logger.debug(f"done convergecast x{stages} on {cover.radius}-cover: {metrics.messages_total} messages")
    return metrics


def done_convergecast(g: NetworkGraph, cover: SparseCover, doneness: Optional[Doneness] = None,
                      adversary: Optional[AdversarySpec] = None, event_cap: int = DEFAULT_EVENT_CAP,
                      bus: Optional[EventBus] = None, trace: bool = False,
                      active: Optional[Iterable[int]] = None) -> RunMetrics:
    """Notify each node once every node within the cover radius of it is done."""
    return done_convergecast_extended(g, cover, 1, doneness, adversary, event_cap, bus, trace, active)
