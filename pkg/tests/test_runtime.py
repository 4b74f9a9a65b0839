"""
Unit tests for the asynchronous runtime: per-edge scheduling, acknowledgements,
normalized time and the failure modes.
"""

import pytest

from modules.core.adversary import AdversarySpec
from modules.core.constants import TICKS_PER_TAU
from modules.core.errors import EventCapExceeded, NodeHandlerError, ProtocolViolation
from modules.core.events import EventBus, EventRecorder
from modules.core.graph import NetworkGraph
from modules.core.runtime import ACK, ALGORITHM, NodeProgram, RunMetrics, run_async

pytestmark = [pytest.mark.unit]


class Sender(NodeProgram):
    """Node 0 sends the given (payload, tag, stage) triples to node 1 at start."""

    def __init__(self, v, sends=()):
        self.v = v
        self.sends = list(sends)
        self.received = []

    def on_start(self, ctx):
        if self.v == 0:
            for payload, tag, stage in self.sends:
                ctx.send(1, payload, tag, stage)

    def on_receive(self, ctx, envelope):
        self.received.append((envelope.payload, envelope.arrival_time))
        ctx.output(envelope.payload)


def _pair(sends):
    g = NetworkGraph(2, [(0, 1)])
    programs = {0: Sender(0, sends), 1: Sender(1)}
    return g, programs


class TestDelivery:

    def test_single_message_and_ack(self):
        g, programs = _pair([('hi', ('x',), 0)])
        metrics = run_async(g, programs, AdversarySpec('max-delay'))
        assert metrics.messages_total == 2
        assert metrics.messages_by_kind[ALGORITHM] == 1
        assert metrics.messages_by_kind[ACK] == 1
        assert metrics.normalized_time == 2.0
        assert metrics.outputs == {1: 'hi'}
        assert metrics.time_to_all_outputs == 1.0

    def test_one_message_in_flight_per_edge(self):
        g, programs = _pair([(i, ('x',), 0) for i in range(3)])
        metrics = run_async(g, programs, AdversarySpec('max-delay'))
        received = programs[1].received
        assert [p for p, _ in received] == [0, 1, 2]
        assert [t for _, t in received] == [1024, 3072, 5120]
        assert metrics.normalized_time == 6.0

    def test_lower_stage_goes_first(self):
        g, programs = _pair([('late', ('a',), 2), ('early', ('b',), 1)])
        run_async(g, programs, AdversarySpec('max-delay'))
        assert [p for p, _ in programs[1].received] == ['early', 'late']

    def test_tags_are_served_round_robin(self):
        sends = [('a1', ('a',), 0), ('a2', ('a',), 0), ('b1', ('b',), 0)]
        g, programs = _pair(sends)
        run_async(g, programs, AdversarySpec('max-delay'))
        assert [p for p, _ in programs[1].received] == ['a1', 'b1', 'a2']

    def test_categories_follow_tag_head(self):
        g, programs = _pair([('p', ('bfs', 3), 0)])
        metrics = run_async(g, programs)
        assert metrics.messages_by_category['bfs'] == 2

    def test_active_subset(self):
        g = NetworkGraph(3, [(0, 1), (1, 2)])
        seen = {}

        def factory(v, nbrs):
            seen[v] = nbrs
            return NodeProgram()
        run_async(g, factory, active=[0, 1])
        assert seen == {0: (1,), 1: (0,)}


class TestFailures:

    def test_send_to_non_neighbor(self):
        g = NetworkGraph(3, [(0, 1), (1, 2)])

        class Bad(NodeProgram):
            def on_start(self, ctx):
                if ctx.node_id == 0:
                    ctx.send(2, 'x')
        with pytest.raises(ProtocolViolation, match="non-neighbor"):
            run_async(g, lambda v, nbrs: Bad())

    def test_handler_exception_is_wrapped(self):
        g, _ = _pair([])

        class Boom(Sender):
            def on_receive(self, ctx, envelope):
                raise KeyError('boom')
        programs = {0: Sender(0, [('x', ('t',), 0)]), 1: Boom(1)}
        with pytest.raises(NodeHandlerError) as info:
            run_async(g, programs)
        assert info.value.node == 1
        assert isinstance(info.value.cause, KeyError)
        assert info.value.trace_tail

    def test_event_cap(self):
        g = NetworkGraph(2, [(0, 1)])

        class PingPong(NodeProgram):
            def on_start(self, ctx):
                if ctx.node_id == 0:
                    ctx.send(1, 0)

            def on_receive(self, ctx, envelope):
                ctx.send(envelope.src, envelope.payload + 1)
        with pytest.raises(EventCapExceeded):
            run_async(g, lambda v, nbrs: PingPong(), event_cap=100)


class TestDeterminism:

    def test_same_spec_same_trace(self, random12):
        def flood():
            class Flood(NodeProgram):
                def __init__(self):
                    self.seen = False

                def on_start(self, ctx):
                    if ctx.node_id == 0:
                        self.seen = True
                        for u in ctx.neighbors:
                            ctx.send(u, 'f')

                def on_receive(self, ctx, envelope):
                    if not self.seen:
                        self.seen = True
                        for u in ctx.neighbors:
                            ctx.send(u, 'f')
            return lambda v, nbrs: Flood()

        spec = AdversarySpec('uniform-random', seed=5)
        a = run_async(random12, flood(), spec, trace=True)
        b = run_async(random12, flood(), spec, trace=True)
        assert a.trace == b.trace
        assert a.trace_digest == b.trace_digest
        assert a.messages_total == b.messages_total == 4 * random12.m

    def test_publish_reaches_bus(self):
        g = NetworkGraph(2, [(0, 1)])
        bus = EventBus()
        recorder = EventRecorder('hello')
        bus.add_listener(recorder)

        class Announce(NodeProgram):
            def on_start(self, ctx):
                ctx.publish('hello', value=ctx.node_id)
        run_async(g, lambda v, nbrs: Announce(), bus=bus)
        assert [data['node'] for data in recorder.of('hello')] == [0, 1]

    def test_runtime_events(self):
        g, programs = _pair([('a', ('x',), 0), ('b', ('x',), 0)])
        bus = EventBus()
        recorder = EventRecorder('delivered', 'acked', 'output')
        bus.add_listener(recorder)
        metrics = run_async(g, programs, bus=bus)

        delivered = recorder.of('delivered')
        assert [(d['src'], d['dst'], d['payload']) for d in delivered] == [(0, 1, 'a'), (0, 1, 'b')]
        assert all(d['sent'] < d['tick'] for d in delivered)
        acked = recorder.of('acked')
        assert [(d['node'], d['src'], d['dst']) for d in acked] == [(0, 0, 1), (0, 0, 1)]
        assert [(d['node'], d['value']) for d in recorder.of('output')] == [(1, 'a'), (1, 'b')]
        assert len(delivered) + len(acked) == metrics.messages_total

    def test_events_follow_processing_order(self):
        g, programs = _pair([('a', ('x',), 0), ('b', ('x',), 0)])
        bus = EventBus()
        recorder = EventRecorder('delivered', 'acked')
        bus.add_listener(recorder)
        run_async(g, programs, bus=bus)
        # the second envelope waits for the first one's ack
        assert [name for name, _ in recorder.events] == ['delivered', 'acked', 'delivered', 'acked']
        orders = [data['order'] for _, data in recorder.events]
        assert orders == sorted(orders)


class TestRunMetrics:

    def test_absorb_is_sequential(self):
        first = RunMetrics(messages_total=4, normalized_time=2.0, runs=1)
        second = RunMetrics(messages_total=6, normalized_time=3.0, runs=1, outputs={0: 'x'},
                            time_to_all_outputs=1.5)
        first.absorb(second, take_outputs=True)
        assert first.messages_total == 10
        assert first.normalized_time == 5.0
        assert first.time_to_all_outputs == 3.5
        assert first.outputs == {0: 'x'}
        assert first.runs == 2

    def test_absorb_sums_numeric_extras(self):
        a = RunMetrics(extra={'k': 1, 'label': 'a'})
        a.absorb(RunMetrics(extra={'k': 2, 'label': 'b'}))
        assert a.extra == {'k': 3, 'label': 'b'}


class TestSchedulingBounds:

    @pytest.mark.parametrize('kind', ['max-delay', 'uniform-random'])
    @pytest.mark.parametrize('k', [1, 2, 4])
    def test_tags_sharing_an_edge_finish_within_k_times_alone(self, k, kind):
        per_tag = [(i, ('w',), 0) for i in range(3)]
        g, programs = _pair(per_tag)
        alone = run_async(g, programs, AdversarySpec('max-delay')).normalized_time

        sends = [((tag, i), (tag,), 0) for i in range(3) for tag in range(k)]
        g, programs = _pair(sends)
        shared = run_async(g, programs, AdversarySpec(kind, seed=k))
        assert shared.normalized_time <= k * alone
        finished = {}
        for (tag, _), arrival in programs[1].received:
            finished[tag] = arrival
        assert len(finished) == k
        assert max(finished.values()) <= k * alone * TICKS_PER_TAU

    def test_chained_workloads_take_at_most_the_sum(self):
        class Chained(NodeProgram):
            """Node 0 sends `first`, then `second` once every first message is acknowledged."""

            def __init__(self, v, first=0, second=0):
                self.v = v
                self.first = first
                self.second = second
                self.unacked = first

            def on_start(self, ctx):
                if self.v == 0:
                    for i in range(self.first):
                        ctx.send(1, i, ('a',))

            def on_ack(self, ctx, envelope):
                self.unacked -= 1
                if self.unacked == 0:
                    for i in range(self.second):
                        ctx.send(1, i, ('b',))

        g = NetworkGraph(2, [(0, 1)])
        spec = AdversarySpec('max-delay')
        first = run_async(g, {0: Chained(0, first=2), 1: Chained(1)}, spec)
        second = run_async(g, {0: Chained(0, first=3), 1: Chained(1)}, spec)
        both = run_async(g, {0: Chained(0, first=2, second=3), 1: Chained(1)}, spec)
        assert both.normalized_time <= first.normalized_time + second.normalized_time
        assert both.messages_total == first.messages_total + second.messages_total
        composed = RunMetrics().absorb(first).absorb(second)
        assert composed.normalized_time == first.normalized_time + second.normalized_time
