"""
The alpha-synchronizer baseline.

Every node generates every pulse. After all its pulse-p messages are
acknowledged a node is safe for p and tells every neighbour with SAFE(p);
once it is safe and has heard SAFE(p) from all neighbours it runs pulse
p + 1. The price is one safety message per edge direction per pulse.
"""

import logging
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

from ..core.adversary import AdversarySpec
from ..core.constants import DEFAULT_EVENT_CAP
from ..core.errors import ProtocolViolation
from ..core.events import EventBus
from ..core.graph import NetworkGraph
from ..core.runtime import Envelope, NodeContext, NodeProgram, run_async
from ..core.sync_runtime import (PulseContext, PulseFactory, PulseProgram, SyncMessage, make_program,
                                 run_sync, sorted_batch)
from .engine import SynchronizedRun

logger = logging.getLogger(__name__)

ALG_TAG = ('alg',)
SAFE_TAG = ('safe',)


class AlphaNode(NodeProgram):
    """Physical node running one wrapped PulseProgram under the alpha-synchronizer."""

    def __init__(self, v: int, neighbors: Tuple[int, ...], program: PulseProgram, n: int, horizon: int,
                 messages: List[SyncMessage], truncated: List[bool]):
        self.v = v
        self.neighbors = neighbors
        self.program = program
        self.n = n
        self.horizon = horizon
        self.messages = messages
        self.truncated = truncated
        self.pulse = 0
        self.unacked = 0
        self.safe_sent = False
        self.safe_from: Dict[int, int] = {}
        self.received: Dict[int, List[SyncMessage]] = {}
        self.sent: Dict[int, List[SyncMessage]] = {}

    def _run(self, ctx: NodeContext, pctx: PulseContext) -> None:
        if pctx.outputs:
            ctx.output(pctx.outputs[-1])
        self.sent[self.pulse] = list(pctx.outbox)
        if pctx.outbox and self.pulse >= self.horizon:
            self.truncated[0] = True
            self.sent[self.pulse] = []
            return
        for msg in pctx.outbox:
            self.unacked += 1
            ctx.send(msg.dst, (self.pulse, msg.tag, msg.payload), ALG_TAG, self.pulse)
        self._maybe_safe(ctx)

    def on_start(self, ctx: NodeContext) -> None:
        pctx = PulseContext(self.v, self.neighbors, 0, self.n)
        self.program.on_start(pctx)
        self._run(ctx, pctx)

    def on_receive(self, ctx: NodeContext, envelope: Envelope) -> None:
        if envelope.tag == ALG_TAG:
            pulse, tag, payload = envelope.payload
            if pulse < self.pulse:
                raise ProtocolViolation(f"pulse-{pulse} message received during pulse {self.pulse}", node=self.v)
            msg = SyncMessage(envelope.src, self.v, payload, pulse, tag)
            self.messages.append(msg)
            self.received.setdefault(pulse, []).append(msg)
        else:
            pulse = envelope.payload
            self.safe_from[pulse] = self.safe_from.get(pulse, 0) + 1
            self._maybe_advance(ctx)

    def on_ack(self, ctx: NodeContext, envelope: Envelope) -> None:
        if envelope.tag == ALG_TAG:
            self.unacked -= 1
            self._maybe_safe(ctx)

    def _maybe_safe(self, ctx: NodeContext) -> None:
        if self.safe_sent or self.unacked or self.pulse >= self.horizon:
            return
        self.safe_sent = True
        ctx.publish('safe', pulse=self.pulse)
        for w in self.neighbors:
            ctx.send(w, self.pulse, SAFE_TAG, self.pulse)
        self._maybe_advance(ctx)

    def _maybe_advance(self, ctx: NodeContext) -> None:
        while (self.safe_sent and self.pulse < self.horizon
               and self.safe_from.get(self.pulse, 0) == len(self.neighbors)):
            done = self.pulse
            self.pulse += 1
            self.safe_sent = False
            received = sorted_batch(self.received.pop(done, ()))
            sent = sorted_batch(self.sent.pop(done, ()))
            pctx = PulseContext(self.v, self.neighbors, self.pulse, self.n)
            if received or sent:
                self.program.on_pulse(pctx, received, sent)
            self._run(ctx, pctx)


def alpha_synchronize(g: NetworkGraph, programs: Union[PulseFactory, Mapping[int, PulseProgram]],
                      horizon: Optional[int] = None, adversary: Optional[AdversarySpec] = None,
                      event_cap: int = DEFAULT_EVENT_CAP, trace: bool = False,
                      bus: Optional[EventBus] = None,
                      active: Optional[Iterable[int]] = None) -> SynchronizedRun:
    """Run `programs` for pulses 0..horizon under the alpha-synchronizer, on `active` nodes only if given.

    Without a horizon, the synchronous run's round count T is used (which
    needs a factory, since the programs run twice) and the wrapped messages
    are compared with it.
    """
    oracle = None
    if horizon is None:
        if isinstance(programs, Mapping):
            raise ValueError("alpha_synchronize needs a program factory when no horizon is given")
        if active is not None:
            raise ValueError("alpha_synchronize needs a horizon when running on a node subset")
        oracle = run_sync(g, programs)
        horizon = oracle.rounds
    messages: List[SyncMessage] = []
    truncated = [False]

    def factory(v, nbrs):
        return AlphaNode(v, nbrs, make_program(programs, v, nbrs), g.n, horizon, messages, truncated)

    metrics = run_async(g, factory, adversary, event_cap, trace=trace, bus=bus, active=active)
    metrics.extra['pulses'] = horizon
    run = SynchronizedRun(metrics, messages, truncated[0], horizon)
    if oracle is not None:
        run.check_against(oracle)
    logger.debug(f"alpha run to pulse {horizon}: {metrics.messages_total} messages")
    return run
