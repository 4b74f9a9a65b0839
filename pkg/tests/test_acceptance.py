"""
End-to-end acceptance matrices: exactness, registration guarantees,
synchronizer equivalence, cover invariants, overhead trends, determinism.

Run with `pytest -m acceptance`; the whole file is also marked slow.
"""

import math
import random

import pytest

from modules.apps.programs import boruvka_factory, flood_bfs_factory, min_id_factory
from modules.core.adversary import AdversarySpec
from modules.core.constants import DEFAULT_RADIUS_SHIFT
from modules.core.graph import GraphSpec, bfs_oracle, generate
from modules.core.sync_runtime import message_multiset, run_sync
from modules.covers.construction import build_cover_sync
from modules.covers.decomposition import decompose, decompose_one_color
from modules.covers.verify import verify_cover
from modules.harness.config import ExperimentConfig
from modules.harness.runner import run_experiment
from modules.protocols.alpha import alpha_synchronize
from modules.protocols.complete import complete_bfs, complete_bfs_multi
from modules.protocols.registration import RegistrantPlan, random_cluster_tree, run_registration_schedule
from modules.protocols.synchronizer import synchronize

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

SHIFT = 1
ADVERSARIES = ['max-delay', 'uniform-random', 'edge-biased']


def _graph(family, n, seed, weighted=False):
    return generate(GraphSpec(family, n, seed, weighted))


# ---------------------------------------------------------------------------
# BFS exactness and determinism
# ---------------------------------------------------------------------------


@pytest.mark.parametrize('family', ['path', 'cycle', 'grid', 'random-connected'])
@pytest.mark.parametrize('n', [16, 64])
@pytest.mark.parametrize('adversary', ADVERSARIES)
@pytest.mark.parametrize('seed', [1, 2, 3])
def test_bfs_exact_and_replayable(family, n, adversary, seed):
    config = ExperimentConfig(graph=f"{family}:{n}:{seed}", adversary=f"{adversary}:{seed}", seed=seed,
                              radius_shift=SHIFT)
    first = run_experiment(config, trace=True)
    assert first.passed, first.report.failures()
    replay = run_experiment(config, trace=True)
    assert replay.metrics.trace == first.metrics.trace
    assert replay.to_dict() == first.to_dict()


@pytest.mark.parametrize('family', ['path', 'cycle', 'grid', 'random-connected'])
def test_bfs_exact_at_256_nodes(family):
    config = ExperimentConfig(graph=f"{family}:256:7", adversary='edge-biased:7', seed=7, radius_shift=SHIFT)
    result = run_experiment(config)
    assert result.passed, result.report.failures()


@pytest.mark.parametrize('family', ['path', 'grid'])
def test_bfs_exact_at_the_default_shift(family):
    config = ExperimentConfig(graph=f"{family}:64:2", adversary='uniform-random:2', seed=2)
    assert config.radius_shift == DEFAULT_RADIUS_SHIFT
    result = run_experiment(config)
    assert result.passed, result.report.failures()


@pytest.mark.parametrize('family', ['path', 'grid', 'random-connected'])
@pytest.mark.parametrize('t', [1, 2])
def test_thresholded_bfs_marks_exactly_the_far_nodes(family, t):
    config = ExperimentConfig(graph=f"{family}:25:4", termination='fixed-t', threshold=t, radius_shift=SHIFT,
                              adversary='uniform-random:9')
    result = run_experiment(config)
    assert result.passed, result.report.failures()
    dist, _ = bfs_oracle(config.load_graph(), [0])
    far = {v for v, d in dist.items() if d > 1 << t}
    assert {v for v, out in result.metrics.outputs.items() if out[0] == math.inf} == far


# ---------------------------------------------------------------------------
# Registration guarantees
# ---------------------------------------------------------------------------


@pytest.mark.parametrize('block', range(10))
def test_registration_guarantees_on_random_trees(block):
    for seed in range(block * 100, block * 100 + 100):
        rng = random.Random(seed)
        n = rng.randint(2, 64)
        tree = random_cluster_tree(n, rng.randint(1, 16), rng)
        chosen = rng.sample(range(n), rng.randint(1, n))
        plans = {v: RegistrantPlan(before=rng.randint(0, 6), hold=rng.randint(0, 6)) for v in chosen}
        kind = ADVERSARIES[seed % 3]
        run = run_registration_schedule(tree, plans, AdversarySpec(kind, seed=seed))

        assert run.monitor.violations == [], f"seed {seed}"
        assert run.free == sorted(plans), f"seed {seed}"
        assert run.go_ahead_messages <= run.protocol_messages + len(plans), f"seed {seed}"


# ---------------------------------------------------------------------------
# Synchronizer equivalence
# ---------------------------------------------------------------------------


def _programs(g):
    return {
        'flood': flood_bfs_factory({0: None}),
        'min-id': min_id_factory(),
        'boruvka': boruvka_factory(g),
    }


@pytest.mark.parametrize('program', ['flood', 'min-id', 'boruvka'])
@pytest.mark.parametrize('seed', range(10))
def test_synchronizer_equivalence(program, seed):
    rng = random.Random(seed)
    g = _graph('random-connected', rng.randint(6, 24), seed, weighted=True)
    factory = _programs(g)[program]
    oracle = run_sync(g, factory)
    for kind in ADVERSARIES:
        run = synchronize(g, factory, shift=SHIFT, adversary=AdversarySpec(kind, seed=seed))
        assert message_multiset(run.messages) == message_multiset(oracle)
        assert run.outputs == oracle.outputs
        assert run.equivalent


# ---------------------------------------------------------------------------
# Cover invariants
# ---------------------------------------------------------------------------


@pytest.mark.parametrize('family', ['path', 'cycle', 'grid', 'random-connected', 'balanced-tree'])
@pytest.mark.parametrize('n', [16, 64])
def test_cover_invariants(family, n):
    g = _graph(family, n, 5)
    for d in (1, 2, 4):
        report = verify_cover(g, build_cover_sync(g, d))
        assert report.passed, [c.name for c in report.failures()]
    report = verify_cover(g, decompose(g, 3))
    assert report.passed, [c.name for c in report.failures()]


@pytest.mark.parametrize('family', ['path', 'grid', 'random-connected'])
def test_each_color_clusters_half_the_living_nodes(family):
    g = _graph(family, 49, 2)
    living = set(range(g.n))
    while living:
        clustered, clusters = decompose_one_color(g, living, 3)
        assert len(clustered) * 2 >= len(living)
        assert clustered <= living
        living -= clustered


# ---------------------------------------------------------------------------
# Overhead trends
# ---------------------------------------------------------------------------


PATH_SIZES = [64, 128, 256, 512, 1024]


@pytest.fixture(scope='module')
def path_runs():
    runs = {}
    for n in PATH_SIZES:
        g = _graph('path', n, 1)
        main = complete_bfs(g, 0, shift=SHIFT)
        alpha = alpha_synchronize(g, flood_bfs_factory({0: None}))
        runs[n] = (g, main, alpha)
    return runs


def test_message_overhead_separates_from_alpha(path_runs):
    small, large = PATH_SIZES[0], PATH_SIZES[-1]
    growth = large / small

    def ratio(n, which):
        g, main, alpha = path_runs[n]
        run = main if which == 'main' else alpha
        return run.metrics.messages_total / g.m

    main_growth = ratio(large, 'main') / ratio(small, 'main')
    alpha_growth = ratio(large, 'alpha') / ratio(small, 'alpha')
    assert main_growth <= 0.5 * growth
    assert alpha_growth >= 0.5 * growth


def test_time_tracks_diameter_times_polylog(path_runs):
    small = PATH_SIZES[0]
    g, main, _ = path_runs[small]

    def curve(depth, n):
        return depth * math.log2(n) ** 11

    c = main.metrics.normalized_time / curve(small - 1, small)
    for n in PATH_SIZES[1:]:
        g, main, _ = path_runs[n]
        assert main.metrics.normalized_time <= 4 * c * curve(n - 1, n)


def test_multi_source_time_follows_the_largest_source_distance(path_runs):
    n = PATH_SIZES[-1]
    g, single, _ = path_runs[n]
    sources = list(range(0, n, 16))
    multi = complete_bfs_multi(g, sources, shift=SHIFT)
    _, d1 = bfs_oracle(g, sources)
    assert multi.distances() == bfs_oracle(g, sources)[0]
    assert d1 < (n - 1) / 8
    assert multi.metrics.normalized_time < single.metrics.normalized_time
