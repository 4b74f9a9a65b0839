"""
Complete BFS: doubling thresholded BFS with termination detection.

Iteration t runs a 2^t-thresholded BFS and then adds the cover layer the
iteration after next will need. The run ends when the BFS is known to be
complete:

- approach2: no root's final report says a node at the horizon wanted to
  send, so every node has been reached.
- approach1: a cluster of the largest cover layer contains every active
  node, and a convergecast over it confirms they were all reached.

With several sources, a source whose tree was not truncated is dead: its
tree's nodes keep their distances and drop out, and later iterations run
on the induced alive subgraph with covers rebuilt for it.
"""

import logging
from collections import Counter
from typing import Dict, Iterable, Optional, Set

from ..apps.programs import INFINITY
from ..core.adversary import AdversarySpec
from ..core.constants import DEFAULT_EVENT_CAP, DEFAULT_RADIUS_SHIFT, TERMINATION_APPROACHES
from ..core.errors import ConfigError, SimulationError
from ..core.events import EventBus
from ..core.graph import NetworkGraph
from ..core.runtime import RunMetrics
from ..core.structured_logging import get_pulsesync_logger
from ..covers.async_build import build_base_layers_alpha, extend_layer_async
from ..covers.cluster import LayeredCover
from ..covers.construction import build_layered_cover, extend_layer
from .aggregation import combine_and, combine_fields, combine_sum, run_cluster_aggregation
from .bfs import BfsResult, _check_sources, thresholded_bfs_multi

logger = logging.getLogger(__name__)
run_logger = get_pulsesync_logger('bfs')


class CoverBootstrap:
    """Layered cover for a node set, grown one layer at a time in sync or async mode.

    In async mode the base layers are built under the alpha-synchronizer and
    the higher ones by asynchronous runs over the layers below; sync mode
    builds centrally and only models the cost.
    """

    def __init__(self, g: NetworkGraph, nodes: Set[int], shift: int, mode: str,
                 adversary: Optional[AdversarySpec], event_cap: int, bus: Optional[EventBus]):
        if mode not in ('sync', 'async'):
            raise ConfigError(f"unknown cover mode {mode!r}")
        self.g = g
        self.nodes = set(nodes)
        self.shift = shift
        self.mode = mode
        self.adversary = adversary
        self.event_cap = event_cap
        self.bus = bus
        self.metrics = RunMetrics()
        if mode == 'async':
            self.layered, built = build_base_layers_alpha(g, shift + 1, self.nodes, adversary, event_cap, bus)
            built.outputs = {}
            self.metrics.absorb(built)
        else:
            self.layered, modeled = build_layered_cover(g, shift + 1, self.nodes, shift)
            self.metrics.modeled.update(modeled)

    @property
    def edge_count(self) -> int:
        return sum(1 for u, v in self.g.edges() if u in self.nodes and v in self.nodes)

    def ensure(self, top: int) -> None:
        for j in range(self.layered.top + 1, top + 1):
            if self.mode == 'async':
                built = extend_layer_async(self.g, self.layered, j, self.nodes, self.shift, self.adversary,
                                           self.event_cap, self.bus)
                built.outputs = {}
                self.metrics.absorb(built)
            else:
                modeled: Counter = Counter()
                self.layered.add(j, extend_layer(self.g, self.layered, j, self.nodes, modeled,
                                                 edge_count=self.edge_count))
                self.metrics.modeled.update(modeled)


def _spanning_check(g: NetworkGraph, layered: LayeredCover, nodes: Set[int], reached: Set[int],
                    adversary, event_cap, bus) -> tuple:
    """Approach 1: (some top-layer cluster holds all nodes and all were reached, metrics)."""
    cover = layered.layer(layered.top)
    results, metrics = run_cluster_aggregation(
        g, cover, lambda v, c: (1, v in reached), combine_fields(combine_sum, combine_and), (0, True),
        key=('span',), adversary=adversary, event_cap=event_cap, bus=bus, active=nodes)
    complete = any(count == len(nodes) and all_reached for count, all_reached in results.values())
    return complete, metrics


def complete_bfs_multi(g: NetworkGraph, sources: Iterable[int], termination: str = 'approach2',
                       cover_mode: str = 'sync', shift: int = DEFAULT_RADIUS_SHIFT,
                       adversary: Optional[AdversarySpec] = None, event_cap: int = DEFAULT_EVENT_CAP,
                       trace: bool = False, bus: Optional[EventBus] = None,
                       max_iterations: Optional[int] = None) -> BfsResult:
    """Exact BFS distances and parents from a source set, without knowing the diameter."""
    if termination not in TERMINATION_APPROACHES or termination == 'fixed-t':
        raise ConfigError(f"complete BFS terminates by approach1 or approach2, not {termination!r}")
    sources = _check_sources(g, sources)
    alive = set(range(g.n))
    outputs: Dict[int, tuple] = {}
    metrics = RunMetrics()
    for s in sources:
        outputs[s] = (0, None)
    if g.m == 0 or alive <= sources:
        metrics.outputs = dict(outputs)
        return BfsResult(outputs, metrics, stages=0)

    labels = {s: s for s in sources}
    covers = CoverBootstrap(g, alive, shift, cover_mode, adversary, event_cap, bus)
    limit = max_iterations if max_iterations is not None else 2 * g.n.bit_length() + 4
    t = 0
    while True:
        if t >= limit:
            raise SimulationError(f"complete BFS did not terminate within {limit} iterations")
        covers.ensure(t + shift)
        live_sources = sources & alive
        result = thresholded_bfs_multi(g, live_sources, t, covers.layered, shift, adversary, event_cap,
                                       trace, bus, active=alive, checking=False, labels=labels,
                                       check_horizon=True)
        metrics.absorb(result.metrics)
        t += 1
        reached = {v for v, out in result.outputs.items() if out[0] != INFINITY}
        for v in reached:
            dist, parent, _ = result.outputs[v]
            outputs[v] = (dist, parent)

        if termination == 'approach2':
            done = not result.truncated
        else:
            done, check = _spanning_check(g, covers.layered, alive, reached, adversary, event_cap, bus)
            metrics.absorb(check)
        run_logger.info("bfs iteration finished", iteration=t - 1, reached=len(reached),
                        truncated=result.truncated, messages=metrics.messages_total)
        if done:
            break

        dead_roots = {s for s in live_sources if not result.root_finals.get(s, False)}
        if dead_roots and len(sources) > 1:
            dead = {v for v in reached if result.outputs[v][2] in dead_roots}
            alive -= dead
            if not alive or not (sources & alive):
                break
            logger.debug(f"iteration {t - 1}: {len(dead_roots)} sources dead, {len(alive)} nodes alive")
            covers = _rebuild(covers, g, alive, t + shift, shift, cover_mode, adversary, event_cap, bus)
        else:
            covers.ensure(t + shift + 1)

    metrics.absorb(covers.metrics)
    for v in range(g.n):
        outputs.setdefault(v, (INFINITY, None))
    metrics.outputs = dict(outputs)
    metrics.iterations = t
    return BfsResult(outputs, metrics, stages=t)


def _rebuild(old: CoverBootstrap, g: NetworkGraph, alive: Set[int], top: int, shift: int, mode: str,
             adversary, event_cap, bus) -> CoverBootstrap:
    fresh = CoverBootstrap(g, alive, shift, mode, adversary, event_cap, bus)
    fresh.ensure(top)
    fresh.metrics.absorb(old.metrics)
    return fresh


def complete_bfs(g: NetworkGraph, source: int, **kwargs) -> BfsResult:
    return complete_bfs_multi(g, [source], **kwargs)
