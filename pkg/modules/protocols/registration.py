"""
Registration, deregistration and Go_Ahead on a cluster tree.

Each tree edge carries a mark owned by its child endpoint; the parent keeps
a mirror updated only by messages. Registering at u runs R: if u is not
finished, u marks its parent edge dirty (MARK_DIRTY, which invokes R at the
parent) and waits for R_DONE. The root is always finished. Deregistering
runs D: a node with nothing holding it (no dirty child edge, no running R,
not registered) turns its dirty parent edge into waiting (MARK_WAITING,
which invokes D at the parent). The root, once nothing below it is dirty,
issues GO_AHEAD down every waiting edge; a deregistered node receiving it
becomes free.
"""

import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

from ..core.adversary import AdversarySpec
from ..core.constants import DEFAULT_EVENT_CAP
from ..core.errors import ProtocolViolation
from ..core.events import EventBus
from ..core.graph import NetworkGraph
from ..core.runtime import Envelope, NodeContext, NodeProgram, RunMetrics, Tag, run_async
from ..covers.cluster import ClusterTree

logger = logging.getLogger(__name__)

CLEAN = 'clean'
DIRTY = 'dirty'
WAITING = 'waiting'

MARK_DIRTY = 'mark-dirty'
R_DONE = 'r-done'
MARK_WAITING = 'mark-waiting'
GO_AHEAD = 'go-ahead'

SELF = object()

Callback = Callable[[NodeContext, 'RegistrationInstance'], None]


class RegistrationInstance:
    """One node's state in one registration instance (one cluster, one pulse)."""

    def __init__(self, key: Tag, tree: ClusterTree, node: int, stage: int = 0,
                 on_registered: Optional[Callback] = None, on_free: Optional[Callback] = None):
        self.key = tuple(key)
        self.tag: Tag = ('reg',) + self.key
        self.tree = tree
        self.node = node
        self.parent = tree.parent[node]
        self.children = tree.children.get(node, ())
        self.stage = stage
        self.on_registered = on_registered
        self.on_free = on_free

        self.mark = CLEAN
        self.child_marks: Dict[int, str] = {c: CLEAN for c in self.children}
        self.finished = self.parent is None
        self.r_running = False
        self._r_waiters: List = []

        self.requested = False
        self.registered = False
        self.deregistered = False
        self.free = False

    @property
    def is_root(self) -> bool:
        return self.parent is None

    @property
    def holds(self) -> bool:
        """True while this node still has a registrant at or below it."""
        return ((self.requested and not self.deregistered) or self.r_running
                or any(m == DIRTY for m in self.child_marks.values()))

    # -- operations ----------------------------------------------------

    def register(self, ctx: NodeContext) -> None:
        if self.requested:
            raise ProtocolViolation(f"registers twice in {self.key}", node=self.node)
        self.requested = True
        self._request_r(ctx, SELF)

    def deregister(self, ctx: NodeContext) -> None:
        if not self.registered:
            raise ProtocolViolation(f"deregisters before registering in {self.key}", node=self.node)
        if self.deregistered:
            raise ProtocolViolation(f"deregisters twice in {self.key}", node=self.node)
        self.deregistered = True
        ctx.publish('deregistered', key=self.key)
        self._try_d(ctx)

    # -- messages ------------------------------------------------------

    def _send(self, ctx: NodeContext, dst: int, kind: str) -> None:
        ctx.publish('reg_sent', key=self.key, kind=kind)
        ctx.send(dst, (kind,), self.tag, self.stage)

    def handle(self, ctx: NodeContext, envelope: Envelope) -> None:
        kind = envelope.payload[0]
        src = envelope.src
        if kind == MARK_DIRTY:
            self.child_marks[src] = DIRTY
            self._request_r(ctx, src)
        elif kind == R_DONE:
            self.finished = True
            self.r_running = False
            waiters, self._r_waiters = self._r_waiters, []
            for who in waiters:
                self._r_done_for(ctx, who)
        elif kind == MARK_WAITING:
            self.child_marks[src] = WAITING
            self._try_d(ctx)
        elif kind == GO_AHEAD:
            if self.mark == WAITING:
                self.mark = CLEAN
            self._release(ctx)
        else:
            raise ProtocolViolation(f"unknown registration message {kind!r}", node=self.node)

    # -- R -------------------------------------------------------------

    def _request_r(self, ctx: NodeContext, who) -> None:
        if self.finished:
            self._r_done_for(ctx, who)
            return
        self._r_waiters.append(who)
        if not self.r_running:
            self.r_running = True
            self.mark = DIRTY
            self._send(ctx, self.parent, MARK_DIRTY)

    def _r_done_for(self, ctx: NodeContext, who) -> None:
        if who is SELF:
            self.registered = True
            ctx.publish('registered', key=self.key)
            if self.on_registered is not None:
                self.on_registered(ctx, self)
        else:
            self._send(ctx, who, R_DONE)

    # -- D and Go_Ahead ------------------------------------------------

    def _try_d(self, ctx: NodeContext) -> None:
        if self.holds:
            return
        if self.is_root:
            self._release(ctx)
        elif self.mark == DIRTY:
            self.mark = WAITING
            self.finished = False
            self._send(ctx, self.parent, MARK_WAITING)

    def _release(self, ctx: NodeContext) -> None:
        if self.deregistered and not self.free:
            self.free = True
            ctx.publish('free', key=self.key)
            if self.on_free is not None:
                self.on_free(ctx, self)
        for c in self.children:
            if self.child_marks[c] == WAITING:
                self.child_marks[c] = CLEAN
                self._send(ctx, c, GO_AHEAD)


# ----------------------------------------------------------------------
# Invariant monitor
# ----------------------------------------------------------------------

class RegistrationMonitor:
    """Event-bus listener asserting the registration guarantees after every event.

    Checks that a finished child has a finished parent, that a registered
    node's whole root path is dirty, and that a node becoming free finds
    every node registered before its deregistration already deregistered.
    """

    def __init__(self, instances: Mapping[int, RegistrationInstance]):
        self.instances = instances
        self.order = 0
        self.registered_at: Dict[int, int] = {}
        self.deregistered_at: Dict[int, int] = {}
        self.freed_at: Dict[int, int] = {}
        self.messages: Counter = Counter()
        self.violations: List[str] = []

    def __call__(self, event: str, data: Dict) -> None:
        self.order += 1
        node = data.get('node')
        if event == 'reg_sent':
            self.messages[data['kind']] += 1
        elif event == 'registered':
            self.registered_at[node] = self.order
        elif event == 'deregistered':
            self.deregistered_at[node] = self.order
        elif event == 'free':
            self.freed_at[node] = self.order
            cutoff = self.deregistered_at[node]
            for other, at in self.registered_at.items():
                if at < cutoff and other not in self.deregistered_at:
                    self.violations.append(
                        f"node {node} freed while {other}, registered before it deregistered, is still registered")
        self._check_structure()

    def _check_structure(self) -> None:
        for v, inst in self.instances.items():
            if inst.finished and not inst.is_root and not self.instances[inst.parent].finished:
                self.violations.append(f"node {v} finished under unfinished parent {inst.parent}")
            if inst.registered and not inst.deregistered:
                u = inst
                while not u.is_root:
                    if u.mark != DIRTY:
                        self.violations.append(f"registered node {v} has non-dirty edge at {u.node}")
                        break
                    u = self.instances[u.parent]


# ----------------------------------------------------------------------
# Scheduled runs on a single tree
# ----------------------------------------------------------------------

PING_TAG: Tag = ('delay',)


@dataclass
class RegistrantPlan:
    """Ping/pong round trips to wait before registering and before deregistering."""
    before: int = 0
    hold: int = 0


class _ScheduledRegistrant(NodeProgram):
    def __init__(self, instance: RegistrationInstance, plan: Optional[RegistrantPlan]):
        self.instance = instance
        self.plan = plan
        self._phase = 'idle'
        self._left = 0
        instance.on_registered = self._registered

    def _wait(self, ctx: NodeContext, rounds: int, phase: str) -> None:
        self._phase = phase
        self._left = rounds
        if rounds <= 0 or not ctx.neighbors:
            self._step(ctx)
        else:
            ctx.send(min(ctx.neighbors), 'ping', PING_TAG)

    def _step(self, ctx: NodeContext) -> None:
        if self._phase == 'before':
            self._phase = 'registering'
            self.instance.register(ctx)
        elif self._phase == 'hold':
            self._phase = 'done'
            self.instance.deregister(ctx)

    def _registered(self, ctx: NodeContext, inst: RegistrationInstance) -> None:
        self._wait(ctx, self.plan.hold, 'hold')

    def on_start(self, ctx: NodeContext) -> None:
        if self.plan is not None:
            self._wait(ctx, self.plan.before, 'before')

    def on_receive(self, ctx: NodeContext, envelope: Envelope) -> None:
        if envelope.tag != PING_TAG:
            self.instance.handle(ctx, envelope)
        elif envelope.payload == 'ping':
            ctx.send(envelope.src, 'pong', PING_TAG)
        else:
            self._left -= 1
            if self._left <= 0:
                self._step(ctx)
            else:
                ctx.send(envelope.src, 'ping', PING_TAG)


@dataclass
class RegistrationRun:
    metrics: RunMetrics
    instances: Dict[int, RegistrationInstance]
    monitor: RegistrationMonitor
    free: List[int] = field(default_factory=list)

    @property
    def go_ahead_messages(self) -> int:
        return self.monitor.messages[GO_AHEAD]

    @property
    def protocol_messages(self) -> int:
        return sum(self.monitor.messages[k] for k in (MARK_DIRTY, R_DONE, MARK_WAITING))


def tree_graph(tree: ClusterTree) -> NetworkGraph:
    """The tree itself as a network; node ids must be 0..|tree|-1."""
    return NetworkGraph(len(tree.nodes), tree.tree_edges())


def run_registration_schedule(tree: ClusterTree, plans: Mapping[int, RegistrantPlan],
                              adversary: Optional[AdversarySpec] = None,
                              event_cap: int = DEFAULT_EVENT_CAP,
                              bus: Optional[EventBus] = None) -> RegistrationRun:
    """Run one registration instance on `tree` with the given registrants and timing."""
    g = tree_graph(tree)
    instances = {v: RegistrationInstance(('test',), tree, v) for v in tree.nodes}
    monitor = RegistrationMonitor(instances)
    bus = bus or EventBus()
    bus.add_listener(monitor)
    programs = {v: _ScheduledRegistrant(instances[v], plans.get(v)) for v in tree.nodes}
    metrics = run_async(g, programs, adversary, event_cap, bus=bus)
    free = sorted(v for v, inst in instances.items() if inst.free)
    return RegistrationRun(metrics, instances, monitor, free)


def random_cluster_tree(n: int, max_depth: int, rng: random.Random) -> ClusterTree:
    """Random rooted tree on nodes 0..n-1 with depth at most max_depth, every node a member."""
    order = list(range(n))
    rng.shuffle(order)
    root = order[0]
    parent: Dict[int, Optional[int]] = {root: None}
    depth = {root: 0}
    for v in order[1:]:
        candidates = [u for u in parent if depth[u] < max_depth]
        p = rng.choice(candidates)
        parent[v] = p
        depth[v] = depth[p] + 1
    return ClusterTree(0, root, parent, frozenset(range(n)), max_depth)
