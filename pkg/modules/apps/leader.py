"""
Leader election in epochs over the layered cover.

In epoch i every cluster of the 2^i-cover computes, by convergecast and
broadcast, the smallest candidate id among its members and its member
count. A node stays a candidate only while the broadcast of every cluster
it belongs to names it as the smallest, so the minimum id always survives.
A node outputs as soon as a broadcast reaches it from a cluster that counts
every node: that cluster's minimum is the global one. The election ends in
the first epoch where this happens, and then every node has output.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

from ..core.adversary import AdversarySpec
from ..core.constants import DEFAULT_EVENT_CAP, DEFAULT_RADIUS_SHIFT
from ..core.errors import SimulationError
from ..core.events import EventBus
from ..core.graph import NetworkGraph
from ..core.runtime import NodeContext, RunMetrics, run_async
from ..core.structured_logging import get_pulsesync_logger
from ..covers.cluster import SparseCover
from ..protocols.aggregation import AggregationNode, TreeAggregator, combine_fields, combine_min, combine_sum
from ..protocols.complete import CoverBootstrap
from ..protocols.synchronizer import synchronize
from .programs import INFINITY, min_id_factory

logger = get_pulsesync_logger('leader')


@dataclass
class LeaderResult:
    leader: int
    outputs: Dict[int, int]
    metrics: RunMetrics
    epochs: int


class LeaderNode(AggregationNode):
    """One node's part of an epoch: a min/count aggregation per cluster it lies on."""

    def __init__(self, v: int, n: int, cover: SparseCover, epoch: int, candidate: Dict[int, bool]):
        super().__init__()
        self.v = v
        self.n = n
        self.candidate = candidate
        self.output_sent = False
        for c in cover.trees_at(v):
            self.add_aggregator(TreeAggregator(('leader', epoch, c.cid), c, v,
                                               combine_fields(combine_min, combine_sum), 0, self._on_result))

    def on_start(self, ctx: NodeContext) -> None:
        for agg in self.aggregators.values():
            if not agg.is_member:
                agg.contribute(ctx, (INFINITY, 0))
            else:
                agg.contribute(ctx, (self.v if self.candidate[self.v] else INFINITY, 1))

    def _on_result(self, ctx: NodeContext, agg: TreeAggregator, result: Any) -> None:
        if not agg.is_member:
            return
        smallest, count = result
        if smallest != self.v:
            self.candidate[self.v] = False
        if count == self.n and not self.output_sent:
            self.output_sent = True
            ctx.output(int(smallest))


def leader_election(g: NetworkGraph, adversary: Optional[AdversarySpec] = None,
                    shift: int = DEFAULT_RADIUS_SHIFT, cover_mode: str = 'sync',
                    event_cap: int = DEFAULT_EVENT_CAP, bus: Optional[EventBus] = None) -> LeaderResult:
    """Elect the minimum id; every node outputs the id it learned from a spanning cluster."""
    metrics = RunMetrics()
    if g.n == 1:
        metrics.outputs = {0: 0}
        return LeaderResult(0, {0: 0}, metrics, 0)

    covers = CoverBootstrap(g, set(range(g.n)), shift, cover_mode, adversary, event_cap, bus)
    # node-local state carried across epochs; node v only touches candidate[v]
    candidate = {v: True for v in range(g.n)}
    epoch = 0
    while True:
        if epoch > 2 * g.n.bit_length() + 2:
            raise SimulationError(f"leader election did not finish after {epoch} epochs")
        covers.ensure(epoch)
        cover = covers.layered.layer(epoch)
        run = run_async(g, lambda v, nbrs: LeaderNode(v, g.n, cover, epoch, candidate), adversary, event_cap,
                        bus=bus)
        metrics.absorb(run, take_outputs=bool(run.outputs))
        epoch += 1
        logger.info("leader epoch finished", epoch=epoch - 1, candidates=sum(candidate.values()),
                    messages=metrics.messages_total)
        if run.outputs:
            break

    metrics.absorb(covers.metrics)
    outputs = dict(metrics.outputs)
    metrics.iterations = epoch
    return LeaderResult(min(outputs.values()), outputs, metrics, epoch)


def leader_by_flooding(g: NetworkGraph, adversary: Optional[AdversarySpec] = None, mode: str = 'unknown-T',
                       **kwargs) -> LeaderResult:
    """Minimum-id flooding run through the synchronizer; checked against the synchronous run."""
    run = synchronize(g, min_id_factory(), mode=mode, adversary=adversary, **kwargs)
    outputs = dict(run.outputs)
    leader = min(outputs.values()) if outputs else 0
    return LeaderResult(leader, outputs, run.metrics, run.metrics.iterations)
