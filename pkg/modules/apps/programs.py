"""
Event-driven synchronous programs run by run_sync and by the synchronizers.

Every program here acts only when the pulse handler is called, i.e. upon
receiving (or having sent) messages in the previous pulse; none reads a
clock. Each node's state is private to its PulseProgram instance.
"""

import math
from typing import Any, Dict, Iterable, List, Mapping, Optional, Set, Tuple

from ..core.graph import NetworkGraph, edge_key
from ..core.sync_runtime import PulseContext, PulseFactory, PulseProgram, SyncMessage

INFINITY = math.inf

BFS_TAG = ('bfs',)
MIN_ID_TAG = ('min-id',)


# ----------------------------------------------------------------------
# Flooding BFS
# ----------------------------------------------------------------------

class FloodBFS(PulseProgram):
    """Flooding BFS: a node joins at the first pulse a proposal reaches it.

    Outputs (dist, parent) or, with labels, (dist, parent, label). Among
    same-pulse proposals the smallest sender wins, or the smallest
    (label, sender) when `prefer_label` is set. Nodes in `settled` never
    react, which is how a staged run keeps earlier stages out.
    """

    def __init__(self, v: int, source: bool = False, label: Optional[int] = None,
                 offset: int = 0, prefer_label: bool = False, settled: bool = False):
        self.v = v
        self.source = source
        self.label = label
        self.offset = offset
        self.prefer_label = prefer_label
        self.settled = settled
        self.dist: Optional[int] = None
        self.parent: Optional[int] = None

    def _record(self, ctx: PulseContext) -> None:
        if self.label is None and not self.prefer_label:
            ctx.output((self.dist, self.parent))
        else:
            ctx.output((self.dist, self.parent, self.label))

    def _flood(self, ctx: PulseContext, skip: Set[int]) -> None:
        for w in ctx.neighbors:
            if w not in skip:
                ctx.send(w, self.label, BFS_TAG)

    def on_start(self, ctx: PulseContext) -> None:
        if not self.source:
            return
        self.dist = self.offset
        self._record(ctx)
        self._flood(ctx, set())

    def on_pulse(self, ctx: PulseContext, received: List[SyncMessage], sent: List[SyncMessage]) -> None:
        if self.settled or self.dist is not None or not received:
            return
        if self.prefer_label:
            best = min(received, key=lambda m: (m.payload, m.src))
            self.label = best.payload
        else:
            best = min(received, key=lambda m: m.src)
            self.label = best.payload
        self.parent = best.src
        self.dist = self.offset + ctx.pulse
        self._record(ctx)
        self._flood(ctx, {m.src for m in received})

    def on_horizon(self, ctx: PulseContext) -> None:
        if self.dist is None and not self.settled:
            ctx.output((INFINITY, None) if self.label is None and not self.prefer_label
                       else (INFINITY, None, None))


def flood_bfs_factory(sources: Mapping[int, Optional[int]], offset: int = 0, prefer_label: bool = False,
                      settled: Iterable[int] = ()) -> PulseFactory:
    """Factory for FloodBFS; `sources` maps each source to its label (None for plain BFS)."""
    settled = frozenset(settled)

    def factory(v: int, nbrs: Tuple[int, ...]) -> FloodBFS:
        return FloodBFS(v, source=v in sources, label=sources.get(v), offset=offset,
                        prefer_label=prefer_label, settled=v in settled and v not in sources)
    return factory


# ----------------------------------------------------------------------
# Minimum-id flooding (leader election by flooding)
# ----------------------------------------------------------------------

class MinIdFlood(PulseProgram):
    """Every node floods the smallest id it has seen; outputs that id."""

    def __init__(self, v: int):
        self.v = v
        self.best = v

    def on_start(self, ctx: PulseContext) -> None:
        ctx.output(self.best)
        for w in ctx.neighbors:
            ctx.send(w, self.best, MIN_ID_TAG)

    def on_pulse(self, ctx: PulseContext, received: List[SyncMessage], sent: List[SyncMessage]) -> None:
        heard = min((m.payload for m in received), default=self.best)
        if heard >= self.best:
            return
        self.best = heard
        ctx.output(self.best)
        senders = {m.src for m in received if m.payload == heard}
        for w in ctx.neighbors:
            if w not in senders:
                ctx.send(w, self.best, MIN_ID_TAG)


def min_id_factory() -> PulseFactory:
    return lambda v, nbrs: MinIdFlood(v)


# ----------------------------------------------------------------------
# Borůvka MST
# ----------------------------------------------------------------------

# Phase k at node u:
#   FRAG    u tells every neighbour its phase-k fragment id.
#   REPORT  once all neighbours' ids are in, the lightest outgoing edge is
#           convergecast to the fragment leader (the minimum id).
#   CHOOSE  the leader broadcasts the fragment's lightest outgoing edge, or
#           FINISH when there is none.
#   CHOICE  every node tells each outgoing neighbour whether their edge was
#           chosen, so both endpoints know the merged tree's edges.
#   ROOT    the core edge (chosen by both sides) roots the merged tree at its
#           smaller endpoint; ROOT floods over the merged tree.
#   DONE    convergecast of the merged fragment's minimum id.
#   NEWID   broadcast of that id; receivers enter phase k + 1.

MST_TAGS = {kind: ('mst', kind) for kind in
            ('frag', 'report', 'choose', 'finish', 'choice', 'root', 'done', 'newid')}

NO_EDGE = (INFINITY, -1, -1)


class BoruvkaMST(PulseProgram):
    """Synchronous Borůvka; each node outputs its sorted incident MST edges."""

    def __init__(self, v: int, weights: Mapping[int, int]):
        self.v = v
        self.weights = dict(weights)
        self.phase = 0
        self.fid = v
        self.parent: Optional[int] = None
        self.tree: Set[int] = set()  # fragment tree neighbours
        self.mst: Set[int] = set()
        self.finished = False
        self.held: List[SyncMessage] = []
        self._reset_phase()

    def _reset_phase(self) -> None:
        self.nbr_fid: Dict[int, int] = {}
        self.reports: Dict[int, Tuple] = {}
        self.reported = False
        self.choice: Optional[Tuple] = None
        self.choices_in: Dict[int, bool] = {}
        self.merged: Optional[Set[int]] = None
        self.root_from: Optional[int] = None
        self.rooted = False
        self.new_parent: Optional[int] = None
        self.new_children: Set[int] = set()
        self.done_in: Dict[int, int] = {}
        self.done_sent = False

    # -- helpers -------------------------------------------------------

    @property
    def children(self) -> Set[int]:
        return self.tree - ({self.parent} if self.parent is not None else set())

    def _send(self, ctx: PulseContext, dst: int, kind: str, payload: Any) -> None:
        ctx.send(dst, payload, MST_TAGS[kind])

    def _outgoing(self) -> List[int]:
        return sorted(w for w, f in self.nbr_fid.items() if f != self.fid)

    def _enter_phase(self, ctx: PulseContext) -> None:
        self._reset_phase()
        for w in ctx.neighbors:
            self._send(ctx, w, 'frag', (self.phase, self.fid))

    # -- handlers ------------------------------------------------------

    def on_start(self, ctx: PulseContext) -> None:
        if not ctx.neighbors:
            self.finished = True
            ctx.output(())
            return
        self._enter_phase(ctx)

    def on_pulse(self, ctx: PulseContext, received: List[SyncMessage], sent: List[SyncMessage]) -> None:
        for msg in received:
            if not self.finished:
                self._handle(ctx, msg)

    def _handle(self, ctx: PulseContext, msg: SyncMessage) -> None:
        kind = msg.tag[1]
        phase = msg.payload[0]
        if phase > self.phase:
            # a neighbour already moved on; hold the message until we do
            self.held.append(msg)
            return
        getattr(self, f"_on_{kind}")(ctx, msg.src, *msg.payload[1:])

    def _on_frag(self, ctx: PulseContext, src: int, fid: int) -> None:
        self.nbr_fid[src] = fid
        self._try_report(ctx)

    def _try_report(self, ctx: PulseContext) -> None:
        if self.reported or len(self.nbr_fid) < len(ctx.neighbors):
            return
        if any(c not in self.reports for c in self.children):
            return
        local = min(((self.weights[w], self.v, w) for w in self._outgoing()), default=NO_EDGE)
        best = min([local] + list(self.reports.values()))
        self.reported = True
        if self.parent is None:
            self._decide(ctx, best)
        else:
            self._send(ctx, self.parent, 'report', (self.phase,) + best)

    def _on_report(self, ctx: PulseContext, src: int, weight, a: int, b: int) -> None:
        self.reports[src] = (weight, a, b)
        self._try_report(ctx)

    def _decide(self, ctx: PulseContext, best: Tuple) -> None:
        if best[0] == INFINITY:
            self._on_finish(ctx, None)
        else:
            self._on_choose(ctx, None, *best)

    def _on_finish(self, ctx: PulseContext, src: Optional[int]) -> None:
        for c in sorted(self.children):
            self._send(ctx, c, 'finish', (self.phase,))
        self.finished = True
        ctx.output(tuple(sorted(edge_key(self.v, w) for w in self.mst)))

    def _on_choose(self, ctx: PulseContext, src: Optional[int], weight, a: int, b: int) -> None:
        self.choice = (weight, a, b)
        for c in sorted(self.children):
            self._send(ctx, c, 'choose', (self.phase, weight, a, b))
        for w in self._outgoing():
            self._send(ctx, w, 'choice', (self.phase, a == self.v and b == w))
        self._try_merge(ctx)

    def _on_choice(self, ctx: PulseContext, src: int, chosen: bool) -> None:
        self.choices_in[src] = chosen
        self._try_merge(ctx)

    def _try_merge(self, ctx: PulseContext) -> None:
        if self.merged is not None or self.choice is None:
            return
        if len(self.choices_in) < len(self._outgoing()):
            return
        _, a, b = self.choice
        mine = {b} if a == self.v else set()
        theirs = {w for w, chosen in self.choices_in.items() if chosen}
        self.mst |= mine | theirs
        self.merged = self.tree | mine | theirs
        if a == self.v and b in theirs and self.v < b:
            self.rooted = True
            self._flood_root(ctx, None)
        elif self.root_from is not None:
            self._on_root(ctx, self.root_from)

    def _flood_root(self, ctx: PulseContext, parent: Optional[int]) -> None:
        self.new_parent = parent
        self.new_children = self.merged - ({parent} if parent is not None else set())
        for c in sorted(self.new_children):
            self._send(ctx, c, 'root', (self.phase,))
        self._try_done(ctx)

    def _on_root(self, ctx: PulseContext, src: int) -> None:
        if self.merged is None:
            self.root_from = src
            return
        self.rooted = True
        self._flood_root(ctx, src)

    def _try_done(self, ctx: PulseContext) -> None:
        if self.done_sent or not self.rooted or any(c not in self.done_in for c in self.new_children):
            return
        self.done_sent = True
        smallest = min([self.v] + list(self.done_in.values()))
        if self.new_parent is None:
            self._on_newid(ctx, None, smallest)
        else:
            self._send(ctx, self.new_parent, 'done', (self.phase, smallest))

    def _on_done(self, ctx: PulseContext, src: int, smallest: int) -> None:
        self.done_in[src] = smallest
        self._try_done(ctx)

    def _on_newid(self, ctx: PulseContext, src: Optional[int], fid: int) -> None:
        for c in sorted(self.new_children):
            self._send(ctx, c, 'newid', (self.phase, fid))
        held, self.held = self.held, []
        self.fid = fid
        self.tree = set(self.merged)
        self.parent = self.new_parent
        self.phase += 1
        self._enter_phase(ctx)
        for msg in held:
            if not self.finished:
                self._handle(ctx, msg)


def boruvka_factory(g: NetworkGraph) -> PulseFactory:
    def factory(v: int, nbrs: Tuple[int, ...]) -> BoruvkaMST:
        return BoruvkaMST(v, {w: g.weight(v, w) for w in nbrs})
    return factory


def mst_edges_from_outputs(outputs: Mapping[int, Any]) -> frozenset:
    return frozenset(e for edges in outputs.values() for e in edges)
