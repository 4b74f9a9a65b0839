"""
Pulse-gated execution of an event-driven PulseProgram in the asynchronous model.

Each node v keeps the wrapped program and the history of pulse-tagged
messages it sent and received. Whenever the program would send at pulse q,
v creates the virtual node (v, q); its parent is the smallest-id sender of
a pulse-(q-1) message to v (v itself counts if it sent at q-1), and every
such sender is told by a reply whether it was chosen. This links the
virtual nodes into execution trees rooted at the pulse-0 senders.

Pulse p is released by Go_Ahead(p), sent by each pulse-(p-1) virtual node
to its recipients after the gate for p opens. Gates are held by the virtual
nodes at pulse prev2(p): they register in every cluster of the
2^(level(p) + shift)-cover they belong to once prev(p) is safe below them,
deregister once p is safe below them, and after Go_Ahead from all those
clusters route the release down the execution tree. Pulses with
prev2(p) = 0 are gated instead by one convergecast per cluster in which
non-initiators take part at once and initiators once p is safe.

A virtual node reports safety upward in increasing pulse order, each report
only after the registrations that pulse triggers are confirmed, and sends
FINAL once all its messages are acknowledged and answered and all its
children sent FINAL. A root's FINAL carries whether some virtual node at
the horizon wanted to send. With horizon checks that only counts when the
recipient had not been reached: the question travels as a pulse-horizon
message, so it arrives after every earlier-pulse message to its recipient.
"""

import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Callable, Deque, Dict, Iterable, List, Mapping, Optional, Set, Tuple, Union

from ..core.adversary import AdversarySpec
from ..core.constants import CHECKING_STAGE_OFFSET, DEFAULT_EVENT_CAP, DEFAULT_RADIUS_SHIFT
from ..core.errors import ModelViolation, ProtocolViolation
from ..core.events import EventBus
from ..core.graph import NetworkGraph
from ..core.runtime import Envelope, NodeContext, NodeProgram, RunMetrics, run_async
from ..core.sync_runtime import (PulseContext, PulseFactory, PulseProgram, SyncMessage, SyncTrace, make_program,
                                 message_multiset, sorted_batch)
from ..core.utils import canonical_json
from ..covers.cluster import LayeredCover
from .aggregation import TreeAggregator, combine_and
from .pulses import level, max_layer_for, prev, schedule_for
from .registration import RegistrationInstance

logger = logging.getLogger(__name__)


@dataclass
class EngineRecord:
    """What every node of one engine run reports back to the driver."""
    messages: List[SyncMessage] = field(default_factory=list)
    root_finals: Dict[int, bool] = field(default_factory=dict)
    virtual_nodes: int = 0
    registrations: Counter = field(default_factory=Counter)  # by level(p)
    deferred_admissions: int = 0
    order_inversions: int = 0
    horizon_notified: Set[int] = field(default_factory=set)

    @property
    def truncated(self) -> bool:
        return any(self.root_finals.values())


@dataclass
class EngineResult:
    metrics: RunMetrics
    record: EngineRecord

    @property
    def outputs(self) -> Dict[int, Any]:
        return self.metrics.outputs

    @property
    def truncated(self) -> bool:
        return self.record.truncated


@dataclass
class _Gate:
    """Registration state of one virtual node for one gated pulse."""
    clusters: List[Tuple[int, int]]
    registered: int = 0
    freed: int = 0
    deregistered: bool = False
    routed: bool = False


class VirtualNode:
    __slots__ = ('owner', 'pulse', 'parent', 'root', 'recipients', 'unacked', 'unreplied',
                 'children', 'reports', 'finals', 'tracked', 'upward', 'cursor', 'started',
                 'gates', 'truncated', 'final_sent', 'source_gates', 'contributed', 'asking')

    def __init__(self, owner: int, pulse: int, parent: Optional[int], root: int):
        self.owner = owner
        self.pulse = pulse
        self.parent = parent
        self.root = root
        self.recipients: Tuple[int, ...] = ()
        self.unacked = 0
        self.unreplied = 0
        self.children: List[int] = []
        self.reports: Dict[int, Dict[int, bool]] = {}
        self.finals: Dict[int, bool] = {}
        self.tracked: Tuple[int, ...] = ()
        self.upward: frozenset = frozenset()
        self.cursor = 0
        self.started: Set[int] = set()
        self.gates: Dict[int, _Gate] = {}
        self.source_gates: Dict[int, int] = {}
        self.contributed: Set[int] = set()
        self.truncated = False
        self.final_sent = False
        self.asking = 0

    def safe(self, x: int) -> bool:
        """All messages of pulses below x in this subtree are sent and acknowledged."""
        if self.unacked:
            return False
        if x <= self.pulse + 1:
            return True
        if self.unreplied:
            return False
        return all(x in self.reports[c] for c in self.children)

    def nonempty(self, x: int) -> bool:
        """Whether this subtree may hold nodes of pulse x; only meaningful once x is safe."""
        if x <= self.pulse + 1:
            return not self.truncated
        return any(self.reports[c].get(x, False) for c in self.children)


class PulseGatedNode(NodeProgram):
    """Physical node running one wrapped PulseProgram under pulse gating."""

    def __init__(self, v: int, neighbors: Tuple[int, ...], program: PulseProgram, n: int,
                 layered: LayeredCover, horizon: int, shift: int, record: EngineRecord,
                 checking_layer: Optional[int] = None, check_horizon: bool = False,
                 on_checked: Optional[Callable[[NodeContext], None]] = None):
        self.v = v
        self.neighbors = neighbors
        self.program = program
        self.n = n
        self.layered = layered
        self.horizon = horizon
        self.shift = shift
        self.record = record
        self.schedule = schedule_for(horizon)
        self.checking_layer = checking_layer
        self.check_horizon = check_horizon
        self.on_checked = on_checked

        self.received: Dict[int, List[SyncMessage]] = {}
        self.sent: Dict[int, List[SyncMessage]] = {}
        self.admitted: Set[int] = {0}
        self.pending: Set[int] = set()
        self.go_ahead: Set[int] = set()
        self.vnodes: Dict[int, VirtualNode] = {}
        self.max_received = -1
        self.roots_by_sender: Dict[Tuple[int, int], int] = {}
        self.has_output = False
        self._home: Optional[int] = None

        self.aggregators: Dict[tuple, TreeAggregator] = {}
        self.registrations: Dict[tuple, RegistrationInstance] = {}
        self._work: Deque[Tuple[int, tuple]] = deque()

    # ------------------------------------------------------------------
    # Runtime entry points
    # ------------------------------------------------------------------

    def on_start(self, ctx: NodeContext) -> None:
        pctx = PulseContext(self.v, self.neighbors, 0, self.n)
        self.program.on_start(pctx)
        self._emit_outputs(ctx, pctx)
        root = None
        if pctx.outbox:
            root = self._create(ctx, 0, None, self.v, pctx)
        self._setup_source_gates(ctx, root)
        self._setup_checking(ctx, root)
        self._drain(ctx)

    def on_receive(self, ctx: NodeContext, envelope: Envelope) -> None:
        kind = envelope.tag[0]
        if kind == 'agg':
            self.aggregators[envelope.tag].handle(ctx, envelope)
        elif kind == 'reg':
            self._registration(envelope.tag).handle(ctx, envelope)
        else:
            self._dispatch(ctx, envelope.src, envelope.payload)
        self._drain(ctx)

    def on_ack(self, ctx: NodeContext, envelope: Envelope) -> None:
        if envelope.tag[0] == 'alg' and envelope.payload[0] == 'msg':
            x = self.vnodes[envelope.payload[1]]
            x.unacked -= 1
            self._touch(ctx, x)
        self._drain(ctx)

    # ------------------------------------------------------------------
    # Virtual-node messaging (local deliveries go through the work queue)
    # ------------------------------------------------------------------

    def _vsend(self, ctx: NodeContext, dst: int, payload: tuple, tag: tuple, stage: int) -> None:
        if dst == self.v:
            self._work.append((self.v, payload))
        else:
            ctx.send(dst, payload, tag, stage)

    def _drain(self, ctx: NodeContext) -> None:
        while self._work:
            src, payload = self._work.popleft()
            self._dispatch(ctx, src, payload)

    def _dispatch(self, ctx: NodeContext, src: int, payload: tuple) -> None:
        kind = payload[0]
        if kind == 'msg':
            _, q, root, mtag, body = payload
            self._on_message(ctx, src, q, root, mtag, body)
        elif kind == 'ga':
            ctx.publish('go_ahead', pulse=payload[1], src=src)
            self.go_ahead.add(payload[1])
            self._try_admit(ctx)
        elif kind == 'reply':
            _, q, chosen = payload
            x = self.vnodes[q]
            x.unreplied -= 1
            if chosen:
                x.children.append(src)
                x.reports[src] = {}
            self._touch(ctx, x)
        elif kind == 'report':
            _, q, pulse, nonempty = payload
            x = self.vnodes[q]
            x.reports[src][pulse] = nonempty
            self._touch(ctx, x)
        elif kind == 'final':
            _, q, truncated = payload
            x = self.vnodes[q]
            x.finals[src] = truncated
            self._touch(ctx, x)
        elif kind == 'route':
            _, q, p = payload
            self._route(ctx, self.vnodes[q + 1], p)
        elif kind == 'registered':
            _, q, p = payload
            x = self.vnodes[q]
            x.gates[p].registered += 1
            self._touch(ctx, x)
        elif kind == 'freed':
            _, q, p = payload
            x = self.vnodes[q]
            gate = x.gates[p]
            gate.freed += 1
            if gate.freed == len(gate.clusters):
                gate.routed = True
                self._route(ctx, x, p)
        elif kind == 'source-gate':
            _, p = payload
            x = self.vnodes[0]
            x.source_gates[p] -= 1
            if x.source_gates[p] == 0:
                self._route(ctx, x, p)
        elif kind == 'ask':
            _, q = payload
            reached = bool(self.received) or 0 in self.vnodes
            self._vsend(ctx, src, ('beyond', q, not reached), ('up', q), q + 1)
        elif kind == 'beyond':
            _, q, beyond = payload
            x = self.vnodes[q]
            x.asking -= 1
            x.truncated = x.truncated or beyond
            self._touch(ctx, x)
        elif kind == 'checked':
            self._on_checked(ctx)
        else:
            raise ProtocolViolation(f"unknown engine message {kind!r}", node=self.v)

    # ------------------------------------------------------------------
    # Wrapped-program history and admission
    # ------------------------------------------------------------------

    def _on_message(self, ctx: NodeContext, src: int, q: int, root: int, mtag: tuple, body: Any) -> None:
        if q + 1 in self.admitted:
            raise ProtocolViolation(f"pulse-{q} message from {src} arrived after pulse {q + 1} was admitted",
                                    node=self.v)
        if q < self.max_received:
            self.record.order_inversions += 1
        self.max_received = max(self.max_received, q)
        msg = SyncMessage(src, self.v, body, q, mtag)
        self.record.messages.append(msg)
        self.received.setdefault(q, []).append(msg)
        self.pending.add(q + 1)
        self.roots_by_sender[(q, src)] = root

    def _try_admit(self, ctx: NodeContext) -> None:
        while True:
            ready = self.go_ahead - self.admitted
            if not ready:
                return
            p = min(ready)
            blocking = [x for x in self.pending if x < p]
            if blocking:
                self.record.deferred_admissions += 1
                return
            self._admit(ctx, p)

    def _admit(self, ctx: NodeContext, p: int) -> None:
        self.admitted.add(p)
        self.pending.discard(p)
        ctx.publish('admitted', pulse=p)
        batch = sorted_batch(self.received.get(p - 1, ()))
        own = sorted_batch(self.sent.get(p - 1, ()))
        pctx = PulseContext(self.v, self.neighbors, p, self.n)
        self.program.on_pulse(pctx, batch, own)
        self._emit_outputs(ctx, pctx)

        senders = sorted({m.src for m in batch} | ({self.v} if own else set()))
        if not senders:
            raise ProtocolViolation(f"pulse {p} admitted without a trigger", node=self.v)
        parent = senders[0]
        created = None
        if pctx.outbox:
            root = self.vnodes[p - 1].root if parent == self.v else self.roots_by_sender[(p - 1, parent)]
            created = self._create(ctx, p, parent, root, pctx)
        for s in senders:
            self._vsend(ctx, s, ('reply', p - 1, created is not None and s == parent), ('up', p - 1), p)

    def _create(self, ctx: NodeContext, q: int, parent: Optional[int], root: int,
                pctx: PulseContext) -> VirtualNode:
        seen = set()
        for msg in pctx.outbox:
            if (msg.dst, msg.tag) in seen:
                raise ModelViolation(f"second message to {msg.dst} with tag {msg.tag} in one round",
                                     node=self.v, pulse=q)
            seen.add((msg.dst, msg.tag))
        x = VirtualNode(self.v, q, parent, root)
        self.vnodes[q] = x
        self.record.virtual_nodes += 1
        self.sent[q] = list(pctx.outbox)
        if q >= self.horizon and self.check_horizon:
            # the withheld sends only ask their recipients whether they were reached
            x.recipients = tuple(sorted({m.dst for m in pctx.outbox}))
            x.asking = len(x.recipients)
            for dst in x.recipients:
                ctx.send(dst, ('ask', q), ('alg', q), q)
        elif q >= self.horizon:
            x.truncated = True
        else:
            x.recipients = tuple(sorted({m.dst for m in pctx.outbox}))
            x.unreplied = len(x.recipients) + 1
            x.unacked = len(pctx.outbox)
            x.tracked = self.schedule.tracked(q)
            x.upward = self.schedule.reported_upward(q)
            for msg in pctx.outbox:
                ctx.send(msg.dst, ('msg', q, root, msg.tag, msg.payload), ('alg', q), q)
        self._touch(ctx, x)
        return x

    def _emit_outputs(self, ctx: NodeContext, pctx: PulseContext) -> None:
        if pctx.outputs:
            self.has_output = True
            ctx.output(pctx.outputs[-1])

    # ------------------------------------------------------------------
    # Safety reports, registration and FINAL
    # ------------------------------------------------------------------

    def _touch(self, ctx: NodeContext, x: VirtualNode) -> None:
        self._advance(ctx, x)
        self._check_gates(ctx, x)
        self._maybe_final(ctx, x)

    def _advance(self, ctx: NodeContext, x: VirtualNode) -> None:
        while x.cursor < len(x.tracked):
            pulse = x.tracked[x.cursor]
            if not x.safe(pulse):
                return
            if pulse not in x.started:
                x.started.add(pulse)
                if x.pulse > 0:
                    for p in self.schedule.triggered_by(x.pulse, pulse):
                        if x.nonempty(pulse):
                            self._register(ctx, x, p)
            if any(g.registered < len(g.clusters) for p, g in x.gates.items() if prev(p) == pulse):
                return
            if x.parent is not None and pulse in x.upward:
                self._vsend(ctx, x.parent, ('report', x.pulse - 1, pulse, x.nonempty(pulse)),
                            ('up', x.pulse - 1), pulse)
            x.cursor += 1

    def _register(self, ctx: NodeContext, x: VirtualNode, p: int) -> None:
        layer = int(level(p)) + self.shift
        cover = self.layered.layer(layer)
        clusters = [(layer, cid) for cid in cover.membership.get(self.v, ())]
        x.gates[p] = _Gate(clusters)
        self.record.registrations[int(level(p))] += 1
        for layer, cid in clusters:
            self._registration(('reg', layer, cid, p)).register(ctx)

    def _check_gates(self, ctx: NodeContext, x: VirtualNode) -> None:
        for p, gate in x.gates.items():
            if not gate.deregistered and gate.registered == len(gate.clusters) and x.safe(p):
                gate.deregistered = True
                for layer, cid in gate.clusters:
                    self._registration(('reg', layer, cid, p)).deregister(ctx)
        if x.pulse == 0:
            for p in list(x.source_gates):
                if p not in x.contributed and x.safe(p):
                    x.contributed.add(p)
                    for agg in self._source_aggregators(p):
                        if agg.is_member:
                            agg.contribute(ctx, True)

    def _maybe_final(self, ctx: NodeContext, x: VirtualNode) -> None:
        if x.final_sent or x.cursor < len(x.tracked) or x.unacked or x.unreplied or x.asking:
            return
        if len(x.finals) < len(x.children):
            return
        x.final_sent = True
        truncated = x.truncated or any(x.finals.values())
        if x.parent is None:
            self.record.root_finals[self.v] = truncated
            ctx.publish('root_final', truncated=truncated)
            self._checking_done(ctx)
        else:
            self._vsend(ctx, x.parent, ('final', x.pulse - 1, truncated), ('up', x.pulse - 1), x.pulse)

    # ------------------------------------------------------------------
    # Release
    # ------------------------------------------------------------------

    def _route(self, ctx: NodeContext, x: VirtualNode, p: int) -> None:
        if x.pulse == p - 1:
            for dst in x.recipients:
                ctx.send(dst, ('ga', p), ('alg', p - 1), p)
            self._work.append((self.v, ('ga', p)))
            return
        for c in x.children:
            if x.reports[c].get(p, False):
                self._vsend(ctx, c, ('route', x.pulse, p), ('down', x.pulse), p)

    # ------------------------------------------------------------------
    # Registration instances
    # ------------------------------------------------------------------

    def _registration(self, tag: tuple) -> RegistrationInstance:
        inst = self.registrations.get(tag)
        if inst is None:
            _, layer, cid, p = tag
            tree = self.layered.layer(layer).by_id[cid]
            inst = RegistrationInstance((layer, cid, p), tree, self.v, p,
                                        on_registered=self._registered_cb, on_free=self._freed_cb)
            self.registrations[tag] = inst
        return inst

    def _registered_cb(self, ctx: NodeContext, inst: RegistrationInstance) -> None:
        p = inst.key[2]
        self._work.append((self.v, ('registered', self._gate_holder(p), p)))

    def _freed_cb(self, ctx: NodeContext, inst: RegistrationInstance) -> None:
        p = inst.key[2]
        self._work.append((self.v, ('freed', self._gate_holder(p), p)))

    @staticmethod
    def _gate_holder(p: int) -> int:
        return prev(prev(p))

    # ------------------------------------------------------------------
    # Source gates (prev2(p) = 0)
    # ------------------------------------------------------------------

    def _setup_source_gates(self, ctx: NodeContext, root: Optional[VirtualNode]) -> None:
        for p in self.schedule.gated_by(0):
            layer = int(level(p)) + self.shift
            cover = self.layered.layer(layer)
            for tree in cover.trees_at(self.v):
                agg = TreeAggregator(('gate', layer, tree.cid, p), tree, self.v, combine_and, p,
                                     self._source_gate_result)
                self.aggregators[agg.tag] = agg
                if root is None or not agg.is_member:
                    agg.contribute(ctx, True)
            if root is not None:
                root.source_gates[p] = len(cover.membership.get(self.v, ()))
        if root is not None:
            self._touch(ctx, root)

    def _source_aggregators(self, p: int) -> List[TreeAggregator]:
        layer = int(level(p)) + self.shift
        return [self.aggregators[('agg', 'gate', layer, cid, p)]
                for cid in self.layered.layer(layer).membership.get(self.v, ())]

    def _source_gate_result(self, ctx: NodeContext, agg: TreeAggregator, result: Any) -> None:
        root = self.vnodes.get(0)
        if root is not None and agg.is_member:
            self._work.append((self.v, ('source-gate', agg.key[3])))

    # ------------------------------------------------------------------
    # Checking stage
    # ------------------------------------------------------------------

    def _setup_checking(self, ctx: NodeContext, root: Optional[VirtualNode]) -> None:
        if self.checking_layer is None:
            return
        cover = self.layered.layer(self.checking_layer)
        self._home = cover.home_cluster(self.v).cid
        stage = self.horizon + CHECKING_STAGE_OFFSET
        for tree in cover.trees_at(self.v):
            agg = TreeAggregator(('check', tree.cid), tree, self.v, combine_and, stage, self._checked_cb)
            self.aggregators[agg.tag] = agg
            if root is None or not agg.is_member:
                agg.contribute(ctx, True)

    def _checking_done(self, ctx: NodeContext) -> None:
        if self.checking_layer is None:
            return
        cover = self.layered.layer(self.checking_layer)
        for cid in cover.membership.get(self.v, ()):
            self.aggregators[('agg', 'check', cid)].contribute(ctx, True)

    def _checked_cb(self, ctx: NodeContext, agg: TreeAggregator, result: Any) -> None:
        if agg.key[1] == self._home:
            self._work.append((self.v, ('checked',)))

    def _on_checked(self, ctx: NodeContext) -> None:
        ctx.publish('notified')
        if not self.has_output:
            self.record.horizon_notified.add(self.v)
            pctx = PulseContext(self.v, self.neighbors, self.horizon, self.n)
            self.program.on_horizon(pctx)
            self._emit_outputs(ctx, pctx)
        if self.on_checked is not None:
            self.on_checked(ctx)


def run_engine(g: NetworkGraph, programs: Union[PulseFactory, Mapping[int, PulseProgram]],
               layered: LayeredCover, horizon: int, shift: int = DEFAULT_RADIUS_SHIFT,
               adversary: Optional[AdversarySpec] = None, event_cap: int = DEFAULT_EVENT_CAP,
               trace: bool = False, bus: Optional[EventBus] = None,
               active: Optional[Iterable[int]] = None,
               checking_layer: Optional[int] = None, check_horizon: bool = False) -> EngineResult:
    """Run `programs` for pulses 0..horizon under pulse gating on the asynchronous runtime.

    Sends the program makes at pulse `horizon` are withheld and reported
    through the roots' truncated flags. With `check_horizon`, only withheld
    sends to nodes the run has not reached count as truncation. With
    `checking_layer`, a final convergecast on that layer calls on_horizon at
    every node the run did not reach.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    layered.require(max_layer_for(horizon, shift))
    if checking_layer is not None:
        layered.layer(checking_layer)
    record = EngineRecord()

    def factory(v, nbrs):
        return PulseGatedNode(v, nbrs, make_program(programs, v, nbrs), g.n, layered, horizon, shift,
                              record, checking_layer, check_horizon)

    metrics = run_async(g, factory, adversary, event_cap, trace=trace, bus=bus, active=active)
    metrics.extra.update({
        'virtual_nodes': record.virtual_nodes,
        'deferred_admissions': record.deferred_admissions,
        'order_inversions': record.order_inversions,
        'wrapped_messages': len(record.messages),
    })
    for lv, count in sorted(record.registrations.items()):
        metrics.extra[f"registrations_level_{lv}"] = count
    logger.debug(f"engine run to horizon {horizon}: {metrics.messages_total} messages, "
                 f"{record.virtual_nodes} virtual nodes, truncated={record.truncated}")
    return EngineResult(metrics, record)


@dataclass
class SynchronizedRun:
    """Outcome of running a PulseProgram through a synchronizer."""
    metrics: RunMetrics
    messages: List[SyncMessage]
    truncated: bool
    pulses: int
    equivalent: Optional[bool] = None

    @property
    def outputs(self) -> Dict[int, Any]:
        return self.metrics.outputs

    def check_against(self, oracle: SyncTrace) -> bool:
        """Compare delivered messages and outputs with a synchronous run; sets sync_equivalence."""
        self.equivalent = (message_multiset(self.messages) == message_multiset(oracle)
                           and canonical_json(self.outputs) == canonical_json(oracle.outputs))
        self.metrics.sync_equivalence = self.equivalent
        if not self.equivalent:
            logger.warning(f"synchronized run differs from the synchronous run: "
                           f"{len(self.messages)} vs {oracle.message_total} messages")
        return self.equivalent
