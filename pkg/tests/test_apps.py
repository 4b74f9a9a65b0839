"""
Tests for the applications: leader election, MST and the BFS tree.
"""

import random

import pytest

from modules.apps import leader as leader_module
from modules.apps.bfs_tree import bfs_app, tree_violations
from modules.apps.leader import leader_by_flooding, leader_election
from modules.apps.mst import mst
from modules.core.errors import GraphError
from modules.core.graph import INF, mst_oracle, random_spanning_tree_weight

pytestmark = [pytest.mark.integration]


class TestLeaderElection:

    def test_everyone_outputs_the_minimum(self, small_graph):
        result = leader_election(small_graph, shift=1)
        assert result.leader == 0
        assert set(result.outputs.values()) == {0}
        assert result.epochs >= 1

    def test_under_every_adversary(self, random12, adversary):
        result = leader_election(random12, adversary=adversary, shift=1)
        assert result.outputs == {v: 0 for v in range(12)}
        assert result.metrics.messages_by_category['agg'] > 0

    def test_each_node_outputs_what_its_broadcast_carried(self, grid16, mocker):
        spy = mocker.spy(leader_module.LeaderNode, '_on_result')
        result = leader_election(grid16, shift=1)
        assert result.outputs == {v: 0 for v in range(16)}
        assert result.metrics.outputs == result.outputs
        spanning = {call.args[0].v for call in spy.call_args_list if call.args[3][1] == 16}
        assert spanning == set(range(16))

    def test_async_covers(self, cycle8):
        result = leader_election(cycle8, shift=1, cover_mode='async')
        assert result.leader == 0

    def test_single_node(self, single_node):
        result = leader_election(single_node)
        assert result.leader == 0
        assert result.epochs == 0
        assert result.metrics.messages_total == 0

    def test_flooding_variant_agrees(self, grid16):
        result = leader_by_flooding(grid16, shift=1)
        assert result.leader == 0
        assert result.metrics.sync_equivalence is True


class TestMst:

    def test_matches_kruskal(self, weighted_random10, adversary):
        result = mst(weighted_random10, adversary=adversary, shift=1)
        edges, weight = mst_oracle(weighted_random10)
        assert result.exact
        assert result.edges == edges
        assert result.weight == weight
        assert len(result.edges) == weighted_random10.n - 1

    def test_no_spanning_tree_is_lighter(self, weighted_random10):
        result = mst(weighted_random10, mode='known-T', shift=1)
        rng = random.Random(11)
        for _ in range(10):
            assert result.weight <= random_spanning_tree_weight(weighted_random10, rng)

    def test_alpha_mode(self, weighted_random10):
        result = mst(weighted_random10, mode='alpha')
        assert result.exact
        assert result.metrics.sync_equivalence is True

    def test_needs_weights(self, path9):
        with pytest.raises(GraphError, match="distinct edge weights"):
            mst(path9)


class TestBfsTree:

    def test_outputs_form_a_shortest_path_tree(self, small_graph):
        result = bfs_app(small_graph, [0], shift=1)
        assert tree_violations(small_graph, result.outputs) == {}

    def test_multi_source_forest(self, path16):
        result = bfs_app(path16, [3, 12], shift=1, termination='approach1')
        assert tree_violations(path16, result.outputs) == {}
        assert result.distances()[7] == 4

    def test_violations_are_reported(self, path9):
        outputs = {v: (v, v - 1 if v else None) for v in range(9)}
        outputs[4] = (4, 6)
        outputs[5] = (7, 4)
        outputs[6] = (3, None)
        outputs[7] = (INF, None)
        outputs[8] = (INF, None)
        bad = tree_violations(path9, outputs)
        assert set(bad) == {4, 5, 6}
        assert 'not a neighbor' in bad[4]
        assert 'expected 6' in bad[5]
        assert 'no parent' in bad[6]
