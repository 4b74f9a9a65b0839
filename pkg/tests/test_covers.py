"""
Tests for network decompositions, sparse covers, layered covers and the verifier.
"""

import pytest

from modules.core.adversary import AdversarySpec
from modules.core.errors import CoverError
from modules.core.events import EventBus, EventRecorder
from modules.covers.async_build import AlphaSteps, announce_cover, build_base_layers_alpha, build_cover_async
from modules.covers.cluster import (
    ClusterTree, LayeredCover, SparseCover, format_cover, parse_cover, read_cover, singleton_cover,
    write_cover,
)
from modules.covers.construction import build_cover_sync, build_layered_cover, spans
from modules.covers.decomposition import ConstructionCost, decompose, labelled_bfs
from modules.covers.verify import verify_cover, verify_layered

pytestmark = [pytest.mark.unit]


class TestClusterTree:

    def test_children_and_depth(self):
        c = ClusterTree(0, 0, {0: None, 1: 0, 2: 1, 3: 0}, frozenset({0, 2, 3}))
        assert c.children[0] == (1, 3)
        assert c.depth == 2
        assert c.nodes == frozenset({0, 1, 2, 3})
        assert sorted(c.tree_edges()) == [(0, 1), (0, 3), (1, 2)]

    def test_shape_rejects_rooted_parent(self):
        with pytest.raises(CoverError, match="no parent"):
            ClusterTree(0, 0, {0: 1, 1: None}, frozenset({0})).check_shape()

    def test_shape_rejects_member_outside_tree(self):
        with pytest.raises(CoverError, match="outside the tree"):
            ClusterTree(0, 0, {0: None}, frozenset({0, 5})).check_shape()


class TestDecomposition:

    @pytest.mark.parametrize('k', [1, 3, 5])
    def test_verifies(self, small_graph, k):
        dec = decompose(small_graph, k)
        report = verify_cover(small_graph, dec)
        assert report.passed, report.to_dict()

    def test_charges_cost(self, grid16):
        cost = ConstructionCost()
        decompose(grid16, 3, cost=cost)
        assert cost.rounds > 0
        assert cost.steps > 0

    def test_restricted_to_subset(self, path16):
        nodes = set(range(8))
        dec = decompose(path16, 3, nodes)
        assert set(dec.assignment) == nodes
        assert verify_cover(path16, dec, nodes).passed


class TestSparseCover:

    @pytest.mark.parametrize('d', [1, 2, 4])
    def test_verifies(self, small_graph, d):
        cover = build_cover_sync(small_graph, d)
        report = verify_cover(small_graph, cover)
        assert report.passed, report.to_dict()
        assert report.check('coverage').passed
        assert set(cover.home) == set(range(small_graph.n))

    def test_home_cluster_holds_ball(self, random12):
        cover = build_cover_sync(random12, 2)
        for v in range(random12.n):
            ball = set(labelled_bfs(random12, {v: v}, 2))
            assert ball <= cover.home_cluster(v).members

    def test_radius_must_be_positive(self, path9):
        with pytest.raises(ValueError):
            build_cover_sync(path9, 0)

    def test_singleton_cover_fails_coverage_at_radius_one(self, path9):
        zero = singleton_cover(range(9))
        report = verify_cover(path9, SparseCover(1, zero.clusters, zero.home))
        assert not report.passed
        assert [c.name for c in report.failures()] == ['coverage']

    def test_non_graph_tree_edge_is_reported(self, path9):
        bad = ClusterTree(0, 0, {v: (None if v == 0 else 0) for v in range(9)}, frozenset(range(9)), 1)
        report = verify_cover(path9, SparseCover(1, [bad], {v: 0 for v in range(9)}))
        assert not report.check('c_tree').passed

    def test_missing_home_raises(self):
        with pytest.raises(CoverError):
            SparseCover(1, []).home_cluster(3)


class TestSerialization:

    def test_text_round_trip(self, grid16):
        cover = build_cover_sync(grid16, 2)
        again = parse_cover(format_cover(cover))
        assert format_cover(again) == format_cover(cover)
        assert verify_cover(grid16, again).passed

    def test_file_round_trip(self, tmp_path, path9):
        cover = build_cover_sync(path9, 1)
        path = tmp_path / 'c.cover'
        write_cover(cover, path)
        assert format_cover(read_cover(path)) == format_cover(cover)

    @pytest.mark.parametrize('text', ['', 'cluster 0 0 1\n', 'cover 1 2\ncluster 0 0 1\nmembers 0\nparents 0:-\n',
                                      'cover 1 1\ncluster x 0 1\nmembers 0\nparents 0:-\n'])
    def test_malformed(self, text):
        with pytest.raises(CoverError):
            parse_cover(text)


class TestLayeredCover:

    def test_layers_verify(self, random12):
        layered, modeled = build_layered_cover(random12, 4, shift=1)
        verify_layered(random12, layered, 4)
        assert layered.top == 4
        assert modeled['cover_rounds'] > 0
        assert modeled['alpha_cover_messages'] > 0

    def test_spanning_layer_is_reused(self, path9):
        layered, _ = build_layered_cover(path9, 6, shift=1)
        whole = spans(layered.layer(5), range(9))
        assert whole is not None
        top = layered.layer(6)
        assert len(top.clusters) == 1
        assert top.radius == 64
        assert top.clusters[0].members == frozenset(range(9))

    def test_missing_layer(self):
        with pytest.raises(CoverError, match="missing cover layer"):
            LayeredCover().require(2)

    def test_extends_existing(self, path9):
        layered, _ = build_layered_cover(path9, 1, shift=1)
        build_layered_cover(path9, 3, shift=1, layered=layered)
        assert sorted(layered.layers) == [0, 1, 2, 3]


@pytest.mark.integration
class TestAsyncCover:

    @pytest.mark.parametrize('kind', ['max-delay', 'uniform-random'])
    def test_verifies_and_costs_messages(self, cycle8, layered_for, kind):
        layered = layered_for(cycle8, 2, shift=1)
        cover, metrics = build_cover_async(cycle8, 2, layered, shift=1, adversary=AdversarySpec(kind, seed=3))
        assert verify_cover(cycle8, cover).passed
        assert metrics.messages_total > 0

    def test_needs_layers_up_to_the_shift(self, path9, layered_for):
        with pytest.raises(CoverError, match="layers up to"):
            build_cover_async(path9, 2, layered_for(path9, 0, shift=1), shift=2)

    def test_refuses_a_base_layer_that_misses_balls(self, path9, layered_for):
        layered = layered_for(path9, 2, shift=1)
        alone = singleton_cover(range(9))
        layered.add(1, SparseCover(2, alone.clusters, alone.home))
        with pytest.raises(CoverError, match="layer 1 failed verification"):
            build_cover_async(path9, 4, layered, shift=1)

    def test_refuses_a_layer_with_a_short_radius(self, path9, layered_for):
        layered = layered_for(path9, 2, shift=1)
        layered.add(2, singleton_cover(range(9)))
        with pytest.raises(CoverError, match="radius 0, needs 4"):
            build_cover_async(path9, 4, layered, shift=1)

    def test_every_node_learns_its_trees_are_built(self, cycle8, layered_for):
        cover, metrics = build_cover_async(cycle8, 2, layered_for(cycle8, 2, shift=1), shift=1)
        assert metrics.outputs == {v: True for v in range(8)}
        assert metrics.extra['ready_nodes'] == 8
        assert metrics.messages_by_category['agg'] > 0

    def test_ready_signal_waits_for_every_tree(self, cycle8, layered_for):
        cover = build_cover_sync(cycle8, 2)
        bus = EventBus()
        recorder = EventRecorder('delivered', 'output')
        bus.add_listener(recorder)
        metrics = announce_cover(cycle8, cover, bus=bus)
        assert metrics.outputs == {v: True for v in range(8)}
        ready_at = {d['node']: d['order'] for d in recorder.of('output')}
        for d in recorder.of('delivered'):
            kind, _ = d['payload']
            if kind == 'down':
                assert d['order'] <= ready_at[d['dst']]


@pytest.mark.integration
class TestAlphaBaseLayers:

    def test_same_layers_as_the_central_build(self, path16):
        layered, metrics = build_base_layers_alpha(path16, 2)
        central, _ = build_layered_cover(path16, 2, shift=1)
        verify_layered(path16, layered, 2)
        for j in range(3):
            assert format_cover(layered.layer(j)) == format_cover(central.layer(j))
        assert metrics.messages_total > 0
        assert metrics.messages_by_category['safe'] > 0

    def test_under_every_adversary(self, random12, adversary):
        layered, metrics = build_base_layers_alpha(random12, 1, adversary=adversary)
        verify_layered(random12, layered, 1)
        assert metrics.runs > 0

    def test_tree_counts_reach_the_roots(self, path9):
        steps = AlphaSteps(path9, None)
        trees = {0: {0: None, 1: 0}, 5: {5: None}}
        reach = steps.reach({0: 0, 5: 5}, 3)
        counts = steps.count(trees, {0: {0, 1}, 5: {5}}, {0: [2], 5: [7]}, reach)
        assert counts == {0: (2, 1), 5: (1, 1)}
        assert (reach[2].label, reach[7].label) == (0, 5)
        assert steps.metrics.messages_by_category['safe'] > 0
