"""
Tests for cluster convergecast/broadcast and done-with-P notification.
"""

from unittest.mock import MagicMock

import pytest

from modules.core.errors import ProtocolViolation
from modules.core.events import EventBus, EventRecorder
from modules.covers.construction import build_cover_sync
from modules.covers.decomposition import labelled_bfs
from modules.protocols.aggregation import (
    TreeAggregator, WorkDone, combine_fields, combine_min, combine_sum, done_convergecast,
    done_convergecast_extended, run_cluster_aggregation,
)

pytestmark = [pytest.mark.integration]


class TestClusterAggregation:

    def test_sum_of_member_ids(self, random12, adversary):
        cover = build_cover_sync(random12, 1)
        results, metrics = run_cluster_aggregation(random12, cover, lambda v, c: v, combine_sum, 0,
                                                   adversary=adversary)
        assert results == {c.cid: sum(c.members) for c in cover.clusters}
        assert metrics.messages_by_category['agg'] == metrics.messages_total

    def test_min_and_count_fields(self, grid16):
        cover = build_cover_sync(grid16, 2)
        results, _ = run_cluster_aggregation(grid16, cover, lambda v, c: (v, 1),
                                             combine_fields(combine_min, combine_sum), (float('inf'), 0))
        for c in cover.clusters:
            assert results[c.cid] == (min(c.members), len(c.members))

    def test_double_contribution(self, path9):
        cover = build_cover_sync(path9, 1)
        tree = cover.clusters[0]
        agg = TreeAggregator(('x',), tree, tree.root, combine_sum)
        ctx = MagicMock()
        agg.contribute(ctx, 1)
        with pytest.raises(ProtocolViolation, match="twice"):
            agg.contribute(ctx, 1)

    def test_leaf_sends_up_once_contributed(self, path9):
        cover = build_cover_sync(path9, 1)
        tree = next(c for c in cover.clusters if c.depth >= 1)
        leaf = next(v for v in tree.nodes if not tree.children[v])
        agg = TreeAggregator(('x',), tree, leaf, combine_sum, stage=3)
        ctx = MagicMock()
        agg.contribute(ctx, 5)
        ctx.send.assert_called_once_with(tree.parent[leaf], ('up', 5), ('agg', 'x'), 3)
        assert agg.sent_up


def _orders(recorder, name):
    return {data['node']: data['order'] for data in recorder.of(name)}


def _assert_notified_after_ball(g, radius, recorder):
    done = _orders(recorder, 'done')
    notified = _orders(recorder, 'notified')
    assert set(notified) == set(range(g.n))
    for v, at in notified.items():
        for u in labelled_bfs(g, {v: v}, radius):
            assert done[u] <= at, (v, u)


class TestDoneConvergecast:

    def test_immediate_done_notifies_everyone(self, cycle8, adversary):
        cover = build_cover_sync(cycle8, 2)
        metrics = done_convergecast(cycle8, cover, adversary=adversary)
        assert metrics.outputs == {v: True for v in range(8)}

    def test_notified_only_after_ball_is_done(self, random12, adversary):
        cover = build_cover_sync(random12, 1)
        bus = EventBus()
        recorder = EventRecorder('done', 'notified')
        bus.add_listener(recorder)
        done_convergecast(random12, cover, WorkDone({v: v % 4 for v in range(12)}),
                          adversary=adversary, bus=bus)
        _assert_notified_after_ball(random12, 1, recorder)

    def test_extended_stages_widen_the_ball(self, path16):
        cover = build_cover_sync(path16, 1)
        bus = EventBus()
        recorder = EventRecorder('done', 'notified')
        bus.add_listener(recorder)
        done_convergecast_extended(path16, cover, 3, WorkDone({v: (v * 7) % 5 for v in range(16)}), bus=bus)
        _assert_notified_after_ball(path16, 3, recorder)

    def test_stage_count_positive(self, path9):
        with pytest.raises(ValueError):
            done_convergecast_extended(path9, build_cover_sync(path9, 1), 0)

    def test_active_subset(self, path16):
        nodes = set(range(6))
        cover = build_cover_sync(path16, 1, nodes)
        metrics = done_convergecast(path16, cover, active=nodes)
        assert set(metrics.outputs) == nodes
