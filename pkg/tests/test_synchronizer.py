"""
Tests for complete BFS, the general synchronizer and the alpha baseline.
"""

import pytest

from modules.apps.programs import boruvka_factory, flood_bfs_factory, min_id_factory
from modules.core.constants import DEFAULT_EVENT_CAP
from modules.core.errors import ConfigError
from modules.core.graph import GraphSpec, bfs_oracle, generate
from modules.core.sync_runtime import message_multiset, run_sync
from modules.covers.verify import verify_layered
from modules.protocols.alpha import alpha_synchronize
from modules.protocols.bfs import thresholded_bfs
from modules.protocols.complete import CoverBootstrap, complete_bfs, complete_bfs_multi
from modules.protocols.pulses import max_layer_for
from modules.protocols.synchronizer import synchronize

pytestmark = [pytest.mark.integration]


def _oracle(g, sources):
    return bfs_oracle(g, sources)[0]


# ---------------------------------------------------------------------------
# Complete BFS
# ---------------------------------------------------------------------------


class TestCompleteBfs:

    @pytest.mark.parametrize('termination', ['approach1', 'approach2'])
    def test_exact_on_every_family(self, small_graph, termination):
        result = complete_bfs(small_graph, 0, termination=termination, shift=1)
        assert result.distances() == _oracle(small_graph, [0])

    def test_under_every_adversary(self, random12, adversary):
        result = complete_bfs(random12, 3, shift=1, adversary=adversary)
        assert result.distances() == _oracle(random12, [3])

    def test_iterations_grow_with_depth(self, path16):
        result = complete_bfs(path16, 0, shift=1)
        # eccentricity 15 needs threshold 16
        assert result.stages == 5
        assert result.metrics.iterations == 5

    def test_multi_source_with_dead_sources(self, path16):
        result = complete_bfs_multi(path16, [0, 1, 15], shift=1)
        assert result.distances() == _oracle(path16, [0, 1, 15])
        for v, (dist, parent) in result.outputs.items():
            if dist:
                assert abs(parent - v) == 1

    @pytest.mark.slow
    def test_async_cover_mode(self):
        # diameter 14 outgrows the radius-4 base layers
        g = generate(GraphSpec('grid', 64, 1))
        sync = complete_bfs(g, 0, shift=1)
        built = complete_bfs(g, 0, shift=1, cover_mode='async')
        assert built.outputs == sync.outputs
        assert built.metrics.messages_total > sync.metrics.messages_total

    def test_async_bootstrap_layers_verify(self, path16):
        covers = CoverBootstrap(path16, set(range(16)), 1, 'async', None, DEFAULT_EVENT_CAP, None)
        assert covers.metrics.messages_by_category['safe'] > 0
        covers.ensure(4)
        verify_layered(path16, covers.layered, 4)
        assert covers.metrics.outputs == {}

    def test_sync_bootstrap_only_models_the_base_cost(self, path16):
        covers = CoverBootstrap(path16, set(range(16)), 1, 'sync', None, DEFAULT_EVENT_CAP, None)
        assert covers.metrics.messages_total == 0
        assert covers.metrics.modeled['alpha_cover_messages'] > 0

    def test_same_depth_neighbors_do_not_force_another_iteration(self):
        # the two depth-4 nodes of a 9-cycle only see each other past the horizon
        cycle9 = generate(GraphSpec('cycle', 9, 1))
        result = complete_bfs(cycle9, 0, shift=1)
        assert result.distances() == _oracle(cycle9, [0])
        assert result.stages == 3

    def test_horizon_check_counts_only_unreached_nodes(self, layered_for):
        cycle9 = generate(GraphSpec('cycle', 9, 1))
        layered = layered_for(cycle9, max_layer_for(4, 1), shift=1)
        checked = thresholded_bfs(cycle9, 0, 2, layered, shift=1, check_horizon=True)
        plain = thresholded_bfs(cycle9, 0, 2, layered, shift=1)
        assert checked.distances() == plain.distances() == _oracle(cycle9, [0])
        assert plain.truncated
        assert not checked.truncated

    def test_single_node(self, single_node):
        result = complete_bfs(single_node, 0)
        assert result.outputs == {0: (0, None)}
        assert result.metrics.messages_total == 0

    @pytest.mark.parametrize('termination', ['fixed-t', 'approach3'])
    def test_rejects_other_terminations(self, path9, termination):
        with pytest.raises(ConfigError):
            complete_bfs(path9, 0, termination=termination)

    def test_rejects_unknown_cover_mode(self, path9):
        with pytest.raises(ConfigError, match="cover mode"):
            complete_bfs(path9, 0, cover_mode='magic')


# ---------------------------------------------------------------------------
# General synchronizer
# ---------------------------------------------------------------------------


class TestSynchronize:

    @pytest.mark.parametrize('mode', ['known-T', 'unknown-T'])
    def test_min_id_flood_is_equivalent(self, small_graph, mode):
        run = synchronize(small_graph, min_id_factory(), mode=mode, shift=1)
        assert run.equivalent is True
        assert run.metrics.sync_equivalence is True
        assert set(run.outputs.values()) == {0}

    def test_equivalent_under_every_adversary(self, grid16, adversary):
        run = synchronize(grid16, flood_bfs_factory({5: None}), shift=1, adversary=adversary)
        assert run.equivalent

    def test_boruvka_messages_match(self, weighted_random10):
        factory = boruvka_factory(weighted_random10)
        run = synchronize(weighted_random10, factory, mode='known-T', shift=1)
        assert message_multiset(run.messages) == message_multiset(run_sync(weighted_random10, factory))

    def test_unknown_t_doubles_until_quiet(self, path16):
        run = synchronize(path16, flood_bfs_factory({0: None}), shift=1)
        assert run.pulses == 16
        assert run.metrics.iterations == 5
        assert not run.truncated

    def test_known_t_with_given_rounds(self, path9):
        run = synchronize(path9, flood_bfs_factory({0: None}), mode='known-T', rounds=8, shift=1, check=False)
        assert run.metrics.iterations == 1
        assert run.outputs[8] == (8, 7)
        assert run.equivalent is None

    def test_too_few_rounds_is_truncated(self, path9):
        run = synchronize(path9, flood_bfs_factory({0: None}), mode='known-T', rounds=3, shift=1)
        assert run.truncated
        assert run.equivalent is False

    def test_alpha_mode_delegates(self, cycle8):
        run = synchronize(cycle8, min_id_factory(), mode='alpha')
        assert run.equivalent
        assert 'pulses' in run.metrics.extra

    def test_unknown_mode(self, path9):
        with pytest.raises(ConfigError, match="synchronizer mode"):
            synchronize(path9, min_id_factory(), mode='beta')

    def test_mapping_needs_a_factory(self, path9):
        programs = {v: min_id_factory()(v, path9.neighbors(v)) for v in range(path9.n)}
        with pytest.raises(ValueError, match="factory"):
            synchronize(path9, programs)


# ---------------------------------------------------------------------------
# Alpha baseline
# ---------------------------------------------------------------------------


class TestAlpha:

    def test_equivalent_to_synchronous_run(self, random12, adversary):
        run = alpha_synchronize(random12, min_id_factory(), adversary=adversary)
        assert run.equivalent
        assert run.outputs == run_sync(random12, min_id_factory()).outputs

    def test_sends_a_safe_message_per_edge_per_pulse(self, path9):
        run = alpha_synchronize(path9, flood_bfs_factory({0: None}))
        pulses = run.metrics.extra['pulses']
        assert run.metrics.messages_total >= 2 * path9.m * pulses

    def test_explicit_horizon_with_programs_mapping(self, path9):
        programs = {v: min_id_factory()(v, path9.neighbors(v)) for v in range(path9.n)}
        run = alpha_synchronize(path9, programs, horizon=3)
        assert run.truncated
        assert run.equivalent is None

    def test_mapping_without_horizon(self, path9):
        programs = {v: min_id_factory()(v, path9.neighbors(v)) for v in range(path9.n)}
        with pytest.raises(ValueError):
            alpha_synchronize(path9, programs)
