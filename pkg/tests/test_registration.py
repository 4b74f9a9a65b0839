"""
Tests for registration, deregistration and Go_Ahead on a single cluster tree,
including seeded random schedules checked by the invariant monitor.
"""

import random
from unittest.mock import MagicMock

import pytest

from modules.core.adversary import AdversarySpec
from modules.core.constants import TICKS_PER_TAU
from modules.core.errors import ProtocolViolation
from modules.core.events import EventBus, EventRecorder
from modules.covers.cluster import ClusterTree
from modules.protocols.registration import (
    CLEAN, DIRTY, GO_AHEAD, MARK_DIRTY, MARK_WAITING, R_DONE, RegistrantPlan, RegistrationInstance,
    random_cluster_tree, run_registration_schedule,
)

pytestmark = [pytest.mark.integration]


@pytest.fixture
def chain():
    """0 - 1 - 2 - 3, rooted at 0."""
    return ClusterTree(0, 0, {0: None, 1: 0, 2: 1, 3: 2}, frozenset(range(4)), 3)


class TestSingleInstance:

    def test_root_registers_and_frees_at_once(self, chain):
        run = run_registration_schedule(chain, {0: RegistrantPlan()})
        assert run.instances[0].registered
        assert run.free == [0]
        assert run.metrics.messages_total == 0

    def test_leaf_path_goes_dirty_then_clean(self, chain):
        run = run_registration_schedule(chain, {3: RegistrantPlan(hold=2)})
        assert run.free == [3]
        assert run.monitor.messages[MARK_DIRTY] == 3
        assert run.monitor.messages[R_DONE] == 3
        assert run.go_ahead_messages == 3
        assert all(inst.mark == CLEAN for inst in run.instances.values())
        assert run.monitor.violations == []

    def test_register_twice(self, chain):
        inst = RegistrationInstance(('k',), chain, 0)
        inst.register(MagicMock())
        with pytest.raises(ProtocolViolation, match="twice"):
            inst.register(MagicMock())

    def test_deregister_before_register(self, chain):
        inst = RegistrationInstance(('k',), chain, 2)
        with pytest.raises(ProtocolViolation, match="before registering"):
            inst.deregister(MagicMock())

    def test_unknown_message(self, chain):
        inst = RegistrationInstance(('k',), chain, 1)
        envelope = MagicMock(payload=('bogus',), src=2)
        with pytest.raises(ProtocolViolation, match="unknown registration message"):
            inst.handle(MagicMock(), envelope)

    def test_register_marks_parent_edge(self, chain):
        inst = RegistrationInstance(('k',), chain, 2, stage=4)
        ctx = MagicMock()
        inst.register(ctx)
        assert inst.mark == DIRTY
        assert inst.r_running
        ctx.send.assert_called_once_with(1, (MARK_DIRTY,), ('reg', 'k'), 4)

    def test_shared_path_single_go_ahead(self, chain):
        run = run_registration_schedule(chain, {2: RegistrantPlan(hold=1), 3: RegistrantPlan(hold=4)})
        assert run.free == [2, 3]
        assert run.go_ahead_messages == 3
        assert run.monitor.violations == []


def _random_plans(rng, n):
    chosen = rng.sample(range(n), rng.randint(1, n))
    return {v: RegistrantPlan(before=rng.randint(0, 4), hold=rng.randint(0, 4)) for v in chosen}


class TestRandomSchedules:

    @pytest.mark.parametrize('seed', range(40))
    def test_guarantees_hold(self, seed):
        rng = random.Random(seed)
        tree = random_cluster_tree(rng.randint(2, 14), rng.randint(1, 5), rng)
        plans = _random_plans(rng, len(tree.nodes))
        kind = ['max-delay', 'uniform-random', 'edge-biased', 'lifo-queue'][seed % 4]
        run = run_registration_schedule(tree, plans, AdversarySpec(kind, seed=seed))

        assert run.monitor.violations == []
        assert run.free == sorted(plans)
        assert all(run.instances[v].registered for v in plans)
        assert all(inst.mark == CLEAN for inst in run.instances.values())
        assert run.go_ahead_messages <= run.monitor.messages[MARK_DIRTY] + len(plans)

    def test_random_tree_respects_depth(self):
        rng = random.Random(3)
        tree = random_cluster_tree(30, 3, rng)
        assert tree.depth <= 3
        assert tree.members == frozenset(range(30))


class TestCostAndTiming:

    def test_leaf_registration_message_count(self, chain):
        run = run_registration_schedule(chain, {3: RegistrantPlan(hold=2)}, AdversarySpec('uniform-random', seed=8))
        assert run.monitor.messages == {MARK_DIRTY: 3, R_DONE: 3, MARK_WAITING: 3, GO_AHEAD: 3}
        # each protocol message plus its acknowledgement
        assert run.metrics.messages_by_category['reg'] == 2 * 12

    @pytest.mark.parametrize('seed', range(12))
    def test_every_dirty_edge_is_released_once(self, seed):
        rng = random.Random(100 + seed)
        tree = random_cluster_tree(rng.randint(4, 20), rng.randint(1, 6), rng)
        plans = _random_plans(rng, len(tree.nodes))
        run = run_registration_schedule(tree, plans, AdversarySpec('edge-biased', seed=seed))
        counts = run.monitor.messages
        assert counts[R_DONE] == counts[MARK_DIRTY]
        assert counts[MARK_WAITING] == counts[MARK_DIRTY]
        assert counts[GO_AHEAD] == counts[MARK_WAITING]
        assert counts[MARK_DIRTY] <= sum(_depth(tree, v) for v in plans)
        assert run.metrics.messages_by_category['reg'] == 2 * sum(counts.values())

    @pytest.mark.parametrize('seed', range(8))
    def test_registrants_free_within_linear_time_of_the_height(self, seed, adversary):
        rng = random.Random(200 + seed)
        tree = random_cluster_tree(rng.randint(8, 40), rng.randint(2, 12), rng)
        chosen = rng.sample(sorted(tree.nodes), rng.randint(1, len(tree.nodes)))
        bus = EventBus()
        recorder = EventRecorder('deregistered', 'free')
        bus.add_listener(recorder)
        run = run_registration_schedule(tree, {v: RegistrantPlan() for v in chosen}, adversary, bus=bus)

        bound = 8 * (tree.depth + 1) * TICKS_PER_TAU
        assert run.free == sorted(chosen)
        last_deregistration = max(d['tick'] for d in recorder.of('deregistered'))
        assert max(d['tick'] for d in recorder.of('free')) - last_deregistration <= bound

    def test_deep_registration_takes_linear_time(self, adversary):
        rng = random.Random(7)
        tree = random_cluster_tree(30, 10, rng)
        deepest = max(sorted(tree.nodes), key=lambda v: _depth(tree, v))
        bus = EventBus()
        recorder = EventRecorder('registered')
        bus.add_listener(recorder)
        run_registration_schedule(tree, {deepest: RegistrantPlan(hold=1)}, adversary, bus=bus)
        [registered] = recorder.of('registered')
        assert registered['tick'] <= 4 * _depth(tree, deepest) * TICKS_PER_TAU


def _depth(tree, v):
    depth = 0
    while tree.parent[v] is not None:
        v = tree.parent[v]
        depth += 1
    return depth
