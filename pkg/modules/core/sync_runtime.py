"""
Lockstep synchronous executor for event-driven pulse programs.

A PulseProgram only acts on events: every node runs on_start at pulse 0, and
for p >= 1 a node's on_pulse runs exactly when it received or sent a message
at pulse p-1. Messages sent at pulse p arrive at the end of that round. The
trace this produces (rounds, message multiset, outputs) is the reference an
asynchronous synchronized run must reproduce.
"""

import copy
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Mapping, NamedTuple, Optional, Set, Tuple, Union

from .constants import PAYLOAD_WORDS_FLOOR, PAYLOAD_WORDS_PER_LOG
from .errors import ModelViolation
from .graph import NetworkGraph
from .utils import canonical_json, count_words, lines_digest, payload_digest

logger = logging.getLogger(__name__)

Tag = Tuple[Any, ...]
DEFAULT_TAG: Tag = ('default',)


class SyncMessage(NamedTuple):
    src: int
    dst: int
    payload: Any
    pulse: int
    tag: Tag = DEFAULT_TAG


class PulseContext:
    """Handle given to a PulseProgram for one pulse at one node."""

    __slots__ = ('node_id', 'neighbors', 'pulse', 'n', 'outbox', 'outputs', '_neighbor_set')

    def __init__(self, node_id: int, neighbors: Tuple[int, ...], pulse: int, n: int):
        self.node_id = node_id
        self.neighbors = neighbors
        self.pulse = pulse
        self.n = n
        self.outbox: List[SyncMessage] = []
        self.outputs: List[Any] = []
        self._neighbor_set = frozenset(neighbors)

    def send(self, dst: int, payload: Any, tag: Tag = DEFAULT_TAG) -> None:
        if dst not in self._neighbor_set:
            raise ModelViolation(f"send to non-neighbor {dst}", node=self.node_id, pulse=self.pulse)
        self.outbox.append(SyncMessage(self.node_id, dst, payload, self.pulse, tuple(tag)))

    def output(self, value: Any) -> None:
        self.outputs.append(value)


class PulseProgram:
    """An event-driven synchronous algorithm at one node."""

    def on_start(self, ctx: PulseContext) -> None:
        """Pulse 0. Initiators send here."""

    def on_pulse(self, ctx: PulseContext, received: List[SyncMessage], sent: List[SyncMessage]) -> None:
        """Pulse p >= 1, called only when this node received or sent a message at pulse p-1."""

    def on_horizon(self, ctx: PulseContext) -> None:
        """Called once at nodes a thresholded run never reached."""


PulseFactory = Callable[[int, Tuple[int, ...]], PulseProgram]


@dataclass
class SyncTrace:
    rounds: int = 0
    messages: List[SyncMessage] = field(default_factory=list)
    outputs: Dict[int, Any] = field(default_factory=dict)
    message_total: int = 0
    truncated: bool = False
    horizon: Optional[int] = None

    def trace_lines(self) -> List[str]:
        """Same shape as async trace lines, with the round number as the time column."""
        return [
            f"{m.pulse} {m.src} {m.dst} sync {m.pulse} {canonical_json(list(m.tag))} {payload_digest(m.payload)}"
            for m in self.messages
        ]

    @property
    def trace_digest(self) -> str:
        return lines_digest(self.trace_lines())


def message_key(src: int, dst: int, pulse: int, tag: Tag, payload: Any) -> Tuple:
    return (src, dst, pulse, canonical_json(list(tag)), canonical_json(payload))


def message_multiset(trace: Union[SyncTrace, Iterable[SyncMessage]]) -> Tuple[Tuple, ...]:
    """Canonical sorted multiset of (src, dst, pulse, tag, payload) for equality checks."""
    messages = trace.messages if isinstance(trace, SyncTrace) else trace
    return tuple(sorted(message_key(m.src, m.dst, m.pulse, m.tag, m.payload) for m in messages))


def make_program(programs: Union[PulseFactory, Mapping[int, PulseProgram]], v: int,
                  nbrs: Tuple[int, ...]) -> PulseProgram:
    if isinstance(programs, Mapping):
        return programs[v]
    return programs(v, nbrs)


def sorted_batch(batch: Iterable[SyncMessage]) -> List[SyncMessage]:
    return sorted(batch, key=lambda m: (m.src, canonical_json(list(m.tag))))


class SyncExecutor:
    """Runs one synchronous execution. Use run_sync() for the common case."""

    def __init__(self, g: NetworkGraph, programs: Union[PulseFactory, Mapping[int, PulseProgram]],
                 horizon: Optional[int] = None, debug_order_check: bool = False,
                 active: Optional[Iterable[int]] = None, max_rounds: Optional[int] = None):
        self.g = g
        self.horizon = horizon
        self.debug_order_check = debug_order_check
        self.max_rounds = max_rounds
        self.active: Set[int] = set(range(g.n)) if active is None else set(active)
        self.neighbors = {v: tuple(u for u in g.neighbors(v) if u in self.active) for v in self.active}
        self.programs = {v: make_program(programs, v, self.neighbors[v]) for v in sorted(self.active)}
        self.word_limit = max(PAYLOAD_WORDS_FLOOR, PAYLOAD_WORDS_PER_LOG * math.log2(max(g.n, 2)))
        self._warned = False

    def _check_round(self, v: int, pulse: int, outbox: List[SyncMessage]) -> None:
        seen = set()
        for msg in outbox:
            key = (msg.dst, msg.tag)
            if key in seen:
                raise ModelViolation(f"second message to {msg.dst} with tag {msg.tag} in one round",
                                     node=v, pulse=pulse)
            seen.add(key)
            if not self._warned and count_words(msg.payload) > self.word_limit:
                self._warned = True
                logger.warning(f"payload of {count_words(msg.payload)} words exceeds "
                               f"{self.word_limit:.0f} (node {v}, pulse {pulse})")

    def _pulse_at(self, v: int, pulse: int, received: List[SyncMessage],
                  sent: List[SyncMessage], reverse: bool = False) -> PulseContext:
        ctx = PulseContext(v, self.neighbors[v], pulse, self.g.n)
        batch = list(reversed(received)) if reverse else received
        self.programs[v].on_pulse(ctx, batch, list(sent))
        return ctx

    def _order_check(self, v: int, pulse: int, received: List[SyncMessage],
                     sent: List[SyncMessage], ctx: PulseContext, snapshot: PulseProgram) -> None:
        live = self.programs[v]
        self.programs[v] = snapshot
        try:
            mirror = self._pulse_at(v, pulse, received, sent, reverse=True)
        finally:
            self.programs[v] = live
        if (message_multiset(mirror.outbox) != message_multiset(ctx.outbox)
                or canonical_json(mirror.outputs) != canonical_json(ctx.outputs)):
            raise ModelViolation("behaviour depends on intra-round delivery order", node=v, pulse=pulse)

    def run(self) -> SyncTrace:
        trace = SyncTrace(horizon=self.horizon)
        sent_by: Dict[int, List[SyncMessage]] = defaultdict(list)
        recv_by: Dict[int, List[SyncMessage]] = defaultdict(list)

        def commit(v: int, pulse: int, ctx: PulseContext) -> None:
            if ctx.outputs:
                trace.outputs[v] = ctx.outputs[-1]
            if not ctx.outbox:
                return
            self._check_round(v, pulse, ctx.outbox)
            if self.horizon is not None and pulse >= self.horizon:
                trace.truncated = True
                return
            for msg in ctx.outbox:
                trace.messages.append(msg)
                sent_by[msg.src].append(msg)
                recv_by[msg.dst].append(msg)

        for v in sorted(self.programs):
            ctx = PulseContext(v, self.neighbors[v], 0, self.g.n)
            self.programs[v].on_start(ctx)
            commit(v, 0, ctx)

        pulse = 0
        while sent_by:
            pulse += 1
            if self.max_rounds is not None and pulse > self.max_rounds:
                raise ModelViolation(f"no quiescence within {self.max_rounds} rounds")
            prev_sent, prev_recv = sent_by, recv_by
            sent_by, recv_by = defaultdict(list), defaultdict(list)
            for v in sorted(set(prev_sent) | set(prev_recv)):
                received = sorted_batch(prev_recv.get(v, ()))
                sent = sorted_batch(prev_sent.get(v, ()))
                snapshot = copy.deepcopy(self.programs[v]) if self.debug_order_check else None
                ctx = self._pulse_at(v, pulse, received, sent)
                if snapshot is not None and len(received) > 1:
                    self._order_check(v, pulse, received, sent, ctx, snapshot)
                commit(v, pulse, ctx)

        if self.horizon is not None:
            for v in sorted(self.programs):
                if v not in trace.outputs:
                    ctx = PulseContext(v, self.neighbors[v], self.horizon, self.g.n)
                    self.programs[v].on_horizon(ctx)
                    if ctx.outputs:
                        trace.outputs[v] = ctx.outputs[-1]

        trace.message_total = len(trace.messages)
        trace.rounds = (max(m.pulse for m in trace.messages) + 1) if trace.messages else 0
        logger.debug(f"sync run: T={trace.rounds} M={trace.message_total}")
        return trace


def run_sync(g: NetworkGraph, programs: Union[PulseFactory, Mapping[int, PulseProgram]],
             horizon: Optional[int] = None, debug_order_check: bool = False,
             active: Optional[Iterable[int]] = None, max_rounds: Optional[int] = None) -> SyncTrace:
    """Execute `programs` in lockstep rounds until no message is in flight.

    With `horizon`, pulses after it are cut: sends made at pulse `horizon`
    are dropped and mark the trace truncated, and unreached nodes get
    on_horizon.
    """
    return SyncExecutor(g, programs, horizon, debug_order_check, active, max_rounds).run()
