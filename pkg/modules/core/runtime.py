"""
Deterministic discrete-event simulator of the asynchronous message-passing model.

Every algorithm envelope is acknowledged by its receiver; a directed edge
carries at most one unacknowledged algorithm envelope at a time, so several
procedures (tags) sharing an edge take turns on it. Among the envelopes
waiting on an edge the lowest stage goes first, then tags are served
round-robin, and each tag is FIFO. Acks bypass the queue and are never acked.

Time is kept in integer ticks (TICKS_PER_TAU per tau) and the event queue is
ordered by (time, dst, src, injection sequence), so a run is a pure function
of (graph, programs, adversary).
"""

import heapq
import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Callable, Deque, Dict, Iterable, List, Mapping, Optional, Set, Tuple, Union

from .adversary import Adversary, AdversarySpec
from .constants import DEFAULT_EVENT_CAP, TICKS_PER_TAU, TRACE_TAIL_LENGTH
from .errors import EventCapExceeded, NodeHandlerError, ProtocolViolation, SimulationError
from .events import EventBus
from .graph import NetworkGraph
from .utils import canonical_json, lines_digest, payload_digest

logger = logging.getLogger(__name__)

Tag = Tuple[Any, ...]
DEFAULT_TAG: Tag = ('default',)

ALGORITHM = 'algorithm'
ACK = 'ack'


@dataclass(eq=False)
class Envelope:
    src: int
    dst: int
    payload: Any
    tag: Tag
    stage: int
    kind: str
    seq: int
    send_time: int = 0
    arrival_time: int = 0
    acked: Optional['Envelope'] = None  # for acks: the envelope being acknowledged

    @property
    def category(self) -> str:
        return str(self.tag[0]) if self.tag else 'default'


@dataclass
class RunMetrics:
    """Counts and times of one run, or of a driver's sequence of runs."""
    messages_total: int = 0
    messages_by_kind: Counter = field(default_factory=Counter)
    messages_by_category: Counter = field(default_factory=Counter)
    normalized_time: float = 0.0
    time_to_all_outputs: float = 0.0
    outputs: Dict[int, Any] = field(default_factory=dict)
    events: int = 0
    runs: int = 0
    iterations: int = 0
    modeled: Counter = field(default_factory=Counter)
    sync_equivalence: Optional[bool] = None
    trace: Optional[List[str]] = None
    trace_digest: Optional[str] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def absorb(self, other: 'RunMetrics', take_outputs: bool = False) -> 'RunMetrics':
        """Sequential composition: `other` ran after everything counted so far."""
        if other.outputs and (take_outputs or not self.outputs):
            self.time_to_all_outputs = self.normalized_time + other.time_to_all_outputs
        self.messages_total += other.messages_total
        self.messages_by_kind.update(other.messages_by_kind)
        self.messages_by_category.update(other.messages_by_category)
        self.normalized_time += other.normalized_time
        self.events += other.events
        self.runs += other.runs
        self.modeled.update(other.modeled)
        if other.trace is not None:
            self.trace = (self.trace or []) + other.trace
            self.trace_digest = lines_digest(self.trace)
        if take_outputs:
            self.outputs = dict(other.outputs)
        for key, value in other.extra.items():
            if isinstance(value, (int, float)) and isinstance(self.extra.get(key, 0), (int, float)):
                self.extra[key] = self.extra.get(key, 0) + value
            else:
                self.extra[key] = value
        return self

    def to_dict(self, include_outputs: bool = False) -> Dict[str, Any]:
        data = {
            'messages_total': self.messages_total,
            'messages_by_kind': dict(sorted(self.messages_by_kind.items())),
            'messages_by_category': dict(sorted(self.messages_by_category.items())),
            'normalized_time': self.normalized_time,
            'time_to_all_outputs': self.time_to_all_outputs,
            'events': self.events,
            'runs': self.runs,
            'iterations': self.iterations,
            'modeled': dict(sorted(self.modeled.items())),
            'sync_equivalence': self.sync_equivalence,
            'trace_digest': self.trace_digest,
            'extra': self.extra,
        }
        if include_outputs:
            data['outputs'] = {str(k): v for k, v in sorted(self.outputs.items())}
        return data


class NodeProgram:
    """Event handlers of one node. Sends go through the context."""

    def on_start(self, ctx: 'NodeContext') -> None:
        pass

    def on_receive(self, ctx: 'NodeContext', envelope: Envelope) -> None:
        pass

    def on_ack(self, ctx: 'NodeContext', envelope: Envelope) -> None:
        """`envelope` is the algorithm envelope this node sent that was just acknowledged."""


ProgramFactory = Callable[[int, Tuple[int, ...]], NodeProgram]


class NodeContext:
    """Per-node handle passed to handlers: send, output and publish."""

    __slots__ = ('node_id', 'neighbors', '_sim', '_neighbor_set')

    def __init__(self, node_id: int, neighbors: Tuple[int, ...], sim: 'AsyncSimulation'):
        self.node_id = node_id
        self.neighbors = neighbors
        self._neighbor_set = frozenset(neighbors)
        self._sim = sim

    def send(self, dst: int, payload: Any, tag: Tag = DEFAULT_TAG, stage: int = 0) -> None:
        if dst not in self._neighbor_set:
            raise ProtocolViolation(f"send to non-neighbor {dst}", node=self.node_id)
        self._sim.enqueue(self.node_id, dst, payload, tuple(tag), stage)

    def output(self, value: Any) -> None:
        self._sim.record_output(self.node_id, value)

    def publish(self, event: str, **data) -> None:
        data.setdefault('node', self.node_id)
        self._sim.publish(event, **data)


# ----------------------------------------------------------------------
# Edge scheduling
# ----------------------------------------------------------------------

class EdgeQueues:
    """Pending algorithm envelopes on one directed edge, grouped by tag."""

    __slots__ = ('queues', 'served', 'busy', '_stamp')

    def __init__(self):
        self.queues: Dict[Tag, Deque[Envelope]] = {}
        self.served: Dict[Tag, int] = {}
        self.busy = False
        self._stamp = 0

    def push(self, env: Envelope) -> None:
        q = self.queues.get(env.tag)
        if q is None:
            q = self.queues[env.tag] = deque()
            self.served.setdefault(env.tag, -1)
        q.append(env)

    def pop_next(self) -> Optional[Envelope]:
        env = schedule_edge(self.queues, self.served)
        if env is None:
            return None
        q = self.queues[env.tag]
        q.popleft()
        if not q:
            del self.queues[env.tag]
        self._stamp += 1
        self.served[env.tag] = self._stamp
        return env


def schedule_edge(queues: Mapping[Tag, Deque[Envelope]], served: Mapping[Tag, int]) -> Optional[Envelope]:
    """Next envelope to inject: minimum stage, then least recently served tag, FIFO per tag.

    Ties between never-served tags go to the tag that queued first.
    """
    best = None
    best_key = None
    for order, (tag, q) in enumerate(queues.items()):
        if not q:
            continue
        key = (q[0].stage, served.get(tag, -1), order)
        if best_key is None or key < best_key:
            best, best_key = q[0], key
    return best


# ----------------------------------------------------------------------
# Simulation
# ----------------------------------------------------------------------

class AsyncSimulation:
    """One run of the asynchronous model. Use run_async() for the common case."""

    def __init__(self, g: NetworkGraph, programs: Union[ProgramFactory, Mapping[int, NodeProgram]],
                 adversary: Optional[AdversarySpec] = None, event_cap: int = DEFAULT_EVENT_CAP,
                 trace: bool = False, bus: Optional[EventBus] = None,
                 active: Optional[Iterable[int]] = None):
        self.g = g
        self.adversary = Adversary(adversary or AdversarySpec())
        self.event_cap = event_cap
        self.trace_enabled = trace
        self.bus = bus
        self.active: Set[int] = set(range(g.n)) if active is None else set(active)
        self.now = 0
        self.events = 0
        self._seq = 0
        self._heap: List[Tuple[int, int, int, int, Envelope]] = []
        self._edges: Dict[Tuple[int, int], EdgeQueues] = {}
        self._touched: List[Tuple[int, int]] = []
        self._tail: Deque[Tuple] = deque(maxlen=TRACE_TAIL_LENGTH)
        self._trace: List[str] = []
        self.metrics = RunMetrics(runs=1)
        self._last_output_tick = 0

        self.contexts: Dict[int, NodeContext] = {}
        self.programs: Dict[int, NodeProgram] = {}
        for v in sorted(self.active):
            nbrs = tuple(u for u in g.neighbors(v) if u in self.active)
            self.contexts[v] = NodeContext(v, nbrs, self)
            if isinstance(programs, Mapping):
                self.programs[v] = programs[v]
            else:
                self.programs[v] = programs(v, nbrs)

    # -- called through NodeContext ------------------------------------

    def enqueue(self, src: int, dst: int, payload: Any, tag: Tag, stage: int) -> None:
        self._seq += 1
        env = Envelope(src, dst, payload, tag, stage, ALGORITHM, self._seq)
        key = (src, dst)
        eq = self._edges.get(key)
        if eq is None:
            eq = self._edges[key] = EdgeQueues()
        eq.push(env)
        self._touched.append(key)

    def record_output(self, node: int, value: Any) -> None:
        self.metrics.outputs[node] = value
        self._last_output_tick = self.now
        self.publish('output', node=node, value=value)

    def publish(self, event: str, **data) -> None:
        if self.bus is not None and self.bus.has_listeners:
            data['tick'] = self.now
            data['order'] = self.events
            self.bus.publish(event, data)

    # -- internals -----------------------------------------------------

    def _inject(self, env: Envelope) -> None:
        delay = self.adversary.delay(env.src, env.dst, env.kind, env.tag, env.stage)
        env.send_time = self.now
        env.arrival_time = self.now + delay
        heapq.heappush(self._heap, (env.arrival_time, env.dst, env.src, env.seq, env))

    def _pump(self) -> None:
        touched, self._touched = self._touched, []
        for key in touched:
            eq = self._edges[key]
            if not eq.busy:
                env = eq.pop_next()
                if env is not None:
                    eq.busy = True
                    self._inject(env)

    def _call(self, node: int, handler: str, *args) -> None:
        try:
            getattr(self.programs[node], handler)(self.contexts[node], *args)
        except SimulationError:
            raise
        except Exception as e:
            raise NodeHandlerError(node, e, self._format_tail()) from e

    def _record(self, env: Envelope) -> None:
        self.metrics.messages_total += 1
        self.metrics.messages_by_kind[env.kind] += 1
        self.metrics.messages_by_category[env.category] += 1
        entry = (self.now, env.src, env.dst, env.kind, env.stage, env.tag, env.payload)
        self._tail.append(entry)
        if self.trace_enabled:
            self._trace.append(self._format(entry))

    @staticmethod
    def _format(entry: Tuple) -> str:
        t, src, dst, kind, stage, tag, payload = entry
        tag_text = canonical_json(list(tag))
        return f"{t} {src} {dst} {kind} {stage} {tag_text} {payload_digest(payload)}"

    def _format_tail(self) -> List[str]:
        return [self._format(e) for e in self._tail]

    def run(self) -> RunMetrics:
        for v in sorted(self.programs):
            self._call(v, 'on_start')
            self._pump()

        heap = self._heap
        while heap:
            arrival, dst, src, _, env = heapq.heappop(heap)
            self.events += 1
            if self.events > self.event_cap:
                raise EventCapExceeded(self.events, self.now)
            self.now = arrival
            self._record(env)
            if env.kind == ACK:
                original = env.acked
                eq = self._edges[(original.src, original.dst)]
                eq.busy = False
                self._touched.append((original.src, original.dst))
                self.publish('acked', node=dst, src=original.src, dst=original.dst, tag=original.tag,
                             stage=original.stage)
                self._call(dst, 'on_ack', original)
            else:
                self._seq += 1
                ack = Envelope(dst, src, None, env.tag, env.stage, ACK, self._seq, acked=env)
                self._inject(ack)
                self.publish('delivered', node=dst, src=src, dst=dst, tag=env.tag, stage=env.stage,
                             sent=env.send_time, payload=env.payload)
                self._call(dst, 'on_receive', env)
            self._pump()

        m = self.metrics
        m.events = self.events
        m.normalized_time = self.now / TICKS_PER_TAU
        m.time_to_all_outputs = self._last_output_tick / TICKS_PER_TAU
        if self.trace_enabled:
            m.trace = self._trace
            m.trace_digest = lines_digest(self._trace)
        logger.debug(f"async run quiesced: {m.messages_total} messages, {self.events} events, "
                     f"time {m.normalized_time}")
        return m


def run_async(g: NetworkGraph, programs: Union[ProgramFactory, Mapping[int, NodeProgram]],
              adversary: Optional[AdversarySpec] = None, event_cap: int = DEFAULT_EVENT_CAP,
              trace: bool = False, bus: Optional[EventBus] = None,
              active: Optional[Iterable[int]] = None) -> RunMetrics:
    """Run `programs` on `g` until quiescence and return the run's metrics.

    `programs` is a factory called as factory(node_id, neighbors) or a mapping
    from node id to program. With `active`, only those nodes take part and
    each sees only its active neighbors.
    """
    sim = AsyncSimulation(g, programs, adversary, event_cap, trace, bus, active)
    return sim.run()
