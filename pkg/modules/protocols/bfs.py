"""
Thresholded and staged asynchronous BFS.

A 2^t-thresholded BFS is the flooding BFS program run by the pulse-gated
engine with horizon 2^t: the execution tree it forms is a BFS tree, and
nodes farther than 2^t stay unreached. The staged variant runs one such
flood per stage inside a single asynchronous run, each node entering the
next stage once its 2^t-ball is done with the current one.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Mapping, Optional, Set, Tuple

from ..apps.programs import INFINITY, FloodBFS, flood_bfs_factory
from ..core.adversary import AdversarySpec
from ..core.constants import DEFAULT_EVENT_CAP, DEFAULT_RADIUS_SHIFT
from ..core.errors import GraphError
from ..core.events import EventBus
from ..core.graph import NetworkGraph
from ..core.runtime import DEFAULT_TAG, Envelope, NodeContext, NodeProgram, RunMetrics, Tag, run_async
from ..covers.cluster import LayeredCover
from .aggregation import TreeAggregator, combine_and
from .engine import EngineRecord, PulseGatedNode, run_engine
from .pulses import max_layer_for

logger = logging.getLogger(__name__)


@dataclass
class BfsResult:
    """Per-node BFS outputs: (dist, parent) or (dist, parent, label)."""
    outputs: Dict[int, tuple]
    metrics: RunMetrics
    truncated: bool = False
    root_finals: Dict[int, bool] = field(default_factory=dict)
    stages: int = 1

    def distances(self) -> Dict[int, Any]:
        return {v: out[0] for v, out in self.outputs.items()}

    def parents(self) -> Dict[int, Optional[int]]:
        return {v: out[1] for v, out in self.outputs.items()}


def _check_sources(g: NetworkGraph, sources: Iterable[int]) -> Set[int]:
    sources = set(sources)
    if not sources:
        raise GraphError("BFS needs a nonempty source set")
    bad = [s for s in sources if not 0 <= s < g.n]
    if bad:
        raise GraphError(f"sources {sorted(bad)} are not nodes of the graph")
    return sources


def thresholded_bfs_multi(g: NetworkGraph, sources: Iterable[int], t: int, layered: LayeredCover,
                          shift: int = DEFAULT_RADIUS_SHIFT, adversary: Optional[AdversarySpec] = None,
                          event_cap: int = DEFAULT_EVENT_CAP, trace: bool = False,
                          bus: Optional[EventBus] = None, active: Optional[Iterable[int]] = None,
                          checking: bool = True, labels: Optional[Mapping[int, int]] = None,
                          prefer_label: bool = False, check_horizon: bool = False) -> BfsResult:
    """2^t-thresholded BFS from a source set.

    Every node within 2^t of the sources outputs its exact distance and BFS
    parent. With `checking`, every other node outputs INFINITY once the
    checking stage on the 2^t layer certifies it is out of range. With
    `check_horizon`, the result is truncated only when some node lies beyond
    the horizon, not merely when horizon nodes have other neighbors.
    """
    if t < 0:
        raise ValueError("threshold exponent must be non-negative")
    sources = _check_sources(g, sources)
    return _flood(g, {s: (labels or {}).get(s) for s in sources}, 1 << t, layered, shift, adversary,
                  event_cap, trace, bus, active, checking_layer=t if checking else None,
                  prefer_label=prefer_label or labels is not None, check_horizon=check_horizon)


def thresholded_bfs(g: NetworkGraph, source: int, t: int, layered: LayeredCover, **kwargs) -> BfsResult:
    return thresholded_bfs_multi(g, [source], t, layered, **kwargs)


def _flood(g: NetworkGraph, sources: Mapping[int, Optional[int]], horizon: int, layered: LayeredCover,
           shift: int, adversary: Optional[AdversarySpec], event_cap: int, trace: bool,
           bus: Optional[EventBus], active: Optional[Iterable[int]], checking_layer: Optional[int] = None,
           prefer_label: bool = False, check_horizon: bool = False) -> BfsResult:
    factory = flood_bfs_factory(sources, prefer_label=prefer_label)
    result = run_engine(g, factory, layered, horizon, shift, adversary, event_cap, trace, bus, active,
                        checking_layer, check_horizon)
    return BfsResult(dict(result.outputs), result.metrics, result.truncated, dict(result.record.root_finals))


# ----------------------------------------------------------------------
# Staged BFS
# ----------------------------------------------------------------------

STAGE_MARK = 'stage'


class _StageContext:
    """What one stage's engine sees of its node: tags carry the stage index, outputs go to the node."""

    __slots__ = ('ctx', 'owner', 'index', 'base', 'node_id', 'neighbors')

    def __init__(self, ctx: NodeContext, owner: 'StagedBfsNode', index: int, base: int):
        self.ctx = ctx
        self.owner = owner
        self.index = index
        self.base = base
        self.node_id = ctx.node_id
        self.neighbors = ctx.neighbors

    def send(self, dst: int, payload: Any, tag: Tag = DEFAULT_TAG, stage: int = 0) -> None:
        self.ctx.send(dst, payload, tuple(tag) + (STAGE_MARK, self.index), stage + self.base)

    def output(self, value: Any) -> None:
        self.owner.stage_output(self.ctx, value)

    def publish(self, event: str, **data) -> None:
        data.setdefault('bfs_stage', self.index)
        self.ctx.publish(event, **data)


@dataclass
class _StagePlan:
    n: int
    layered: LayeredCover
    t: int
    shift: int
    horizons: List[int]
    sources: Mapping[int, Optional[int]]
    labelled: bool
    records: List[EngineRecord]

    @property
    def step(self) -> int:
        return 1 << self.t


class StagedBfsNode(NodeProgram):
    """One node of a staged BFS: an engine per stage, started when the node's 2^t-ball finished the last one.

    A node is done with a stage once that stage's checking convergecast
    reaches it. A handover convergecast per cluster of the 2^t layer then
    tells it that every node of its home cluster is done, and it starts the
    next stage's engine. Messages of a stage it has not started yet are held
    until it does.
    """

    def __init__(self, v: int, neighbors: Tuple[int, ...], plan: _StagePlan):
        self.v = v
        self.neighbors = neighbors
        self.plan = plan
        cover = plan.layered.layer(plan.t)
        self.cover = cover
        self.home = cover.home_cluster(v).cid
        self.engines: Dict[int, PulseGatedNode] = {}
        self.contexts: Dict[int, _StageContext] = {}
        self.held: Dict[int, List[Tuple[str, Envelope]]] = {}
        self.result: Optional[tuple] = None
        self.aggregators: Dict[Tag, TreeAggregator] = {}
        for index in range(len(plan.horizons) - 1):
            for c in cover.trees_at(v):
                agg = TreeAggregator(('handover', index, c.cid), c, v, combine_and, (index + 1) * plan.step,
                                     self._handover)
                self.aggregators[agg.tag] = agg

    def on_start(self, ctx: NodeContext) -> None:
        for agg in self.aggregators.values():
            if not agg.is_member:
                agg.contribute(ctx, True)
        self._start(ctx, 0)

    def on_receive(self, ctx: NodeContext, envelope: Envelope) -> None:
        agg = self.aggregators.get(envelope.tag)
        if agg is not None:
            agg.handle(ctx, envelope)
        else:
            self._deliver(ctx, 'on_receive', envelope)

    def on_ack(self, ctx: NodeContext, envelope: Envelope) -> None:
        if envelope.tag not in self.aggregators:
            self._deliver(ctx, 'on_ack', envelope)

    def _deliver(self, ctx: NodeContext, handler: str, envelope: Envelope) -> None:
        index = envelope.tag[-1]
        inner = replace(envelope, tag=envelope.tag[:-2])
        engine = self.engines.get(index)
        if engine is None:
            self.held.setdefault(index, []).append((handler, inner))
        else:
            getattr(engine, handler)(self.contexts[index], inner)

    def _start(self, ctx: NodeContext, index: int) -> None:
        plan = self.plan
        base = index * plan.step
        if index == 0:
            source = self.v in plan.sources
            label = plan.sources.get(self.v)
        else:
            source = self.result is not None and self.result[0] == base
            label = self.result[2] if source and plan.labelled else None
        program = FloodBFS(self.v, source=source, label=label, offset=base, prefer_label=plan.labelled,
                           settled=self.result is not None and not source)
        engine = PulseGatedNode(self.v, self.neighbors, program, plan.n, plan.layered, plan.horizons[index],
                                plan.shift, plan.records[index], checking_layer=plan.t,
                                on_checked=lambda sctx: self._stage_done(sctx.ctx, index))
        sctx = _StageContext(ctx, self, index, base)
        self.engines[index] = engine
        self.contexts[index] = sctx
        ctx.publish('stage_started', bfs_stage=index, source=source)
        engine.on_start(sctx)
        for handler, envelope in self.held.pop(index, ()):
            getattr(engine, handler)(sctx, envelope)

    def stage_output(self, ctx: NodeContext, value: tuple) -> None:
        if value[0] == INFINITY or self.result is not None:
            return
        self.result = value
        ctx.output(value)

    def _stage_done(self, ctx: NodeContext, index: int) -> None:
        if index + 1 < len(self.plan.horizons):
            for cid in self.cover.membership.get(self.v, ()):
                self.aggregators[('agg', 'handover', index, cid)].contribute(ctx, True)
        elif self.result is None:
            self.result = (INFINITY, None, None) if self.plan.labelled else (INFINITY, None)
            ctx.output(self.result)

    def _handover(self, ctx: NodeContext, agg: TreeAggregator, result: Any) -> None:
        _, index, cid = agg.key
        if cid == self.home:
            self._start(ctx, index + 1)


def staged_bfs(g: NetworkGraph, sources: Iterable[int], t: int, stages: int, layered: LayeredCover,
               limit: Optional[int] = None, shift: int = DEFAULT_RADIUS_SHIFT,
               adversary: Optional[AdversarySpec] = None, event_cap: int = DEFAULT_EVENT_CAP,
               trace: bool = False, bus: Optional[EventBus] = None,
               active: Optional[Iterable[int]] = None, labels: Optional[Mapping[int, int]] = None,
               prefer_label: bool = False) -> BfsResult:
    """BFS to distance `limit` (default 2^t * stages) in stages of 2^t, as one asynchronous run.

    Stage T floods from the nodes at distance exactly T * 2^t; nodes settled
    by earlier stages ignore it. Each node starts stage T + 1 on its own,
    once every node of its 2^t-ball is done with stage T. Unreached nodes
    output INFINITY after the last stage. `stages` on the result counts the
    stages that had a source.
    """
    if stages < 1:
        raise ValueError("staged BFS needs at least one stage")
    if t < 0:
        raise ValueError("threshold exponent must be non-negative")
    step = 1 << t
    limit = step * stages if limit is None else limit
    if not 0 <= limit <= step * stages:
        raise ValueError(f"limit {limit} outside [0, {step * stages}]")
    sources = {s: (labels or {}).get(s) for s in _check_sources(g, sources)}
    horizons = [min(step, limit - index * step) for index in range(stages)]
    horizons = [h for h in horizons if h > 0] or [0]
    for horizon in set(horizons):
        layered.require(max_layer_for(horizon, shift))
    layered.layer(t)

    plan = _StagePlan(g.n, layered, t, shift, horizons, sources, labels is not None or prefer_label,
                      [EngineRecord() for _ in horizons])
    metrics = run_async(g, lambda v, nbrs: StagedBfsNode(v, nbrs, plan), adversary, event_cap, trace=trace,
                        bus=bus, active=active)
    flooded = [record for record in plan.records if record.root_finals]
    ran = len(flooded)
    metrics.extra.update({
        'stages': ran,
        'virtual_nodes': sum(r.virtual_nodes for r in plan.records),
        'order_inversions': sum(r.order_inversions for r in plan.records),
    })
    truncated = flooded[-1].truncated if flooded else False
    logger.debug(f"staged bfs: {ran} of {len(horizons)} stages flooded, {metrics.messages_total} messages")
    return BfsResult(dict(metrics.outputs), metrics, truncated, stages=ran)
