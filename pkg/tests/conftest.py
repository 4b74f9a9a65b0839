"""
Shared fixtures for the PulseSync test suite.

Everything runs in-process: graphs are generated from specs, covers are
built with the synchronous constructor, and adversaries are plain specs.
"""

import pytest

from modules.core.adversary import AdversarySpec
from modules.core.graph import GraphSpec, NetworkGraph, generate
from modules.covers.construction import build_layered_cover

# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------


def make_graph(family: str, n: int, seed: int = 1, weighted: bool = False) -> NetworkGraph:
    return generate(GraphSpec(family, n, seed, weighted))


@pytest.fixture
def path9():
    return make_graph('path', 9)


@pytest.fixture
def path16():
    return make_graph('path', 16)


@pytest.fixture
def cycle8():
    return make_graph('cycle', 8)


@pytest.fixture
def grid16():
    return make_graph('grid', 16)


@pytest.fixture
def random12():
    return make_graph('random-connected', 12, seed=3)


@pytest.fixture
def weighted_random10():
    return make_graph('random-connected', 10, seed=2, weighted=True)


@pytest.fixture
def single_node():
    return NetworkGraph(1, [])


@pytest.fixture(params=['path', 'cycle', 'grid', 'random-connected', 'balanced-tree', 'star'])
def small_graph(request):
    """One small graph per family."""
    return make_graph(request.param, 10, seed=4)


# ---------------------------------------------------------------------------
# Adversaries
# ---------------------------------------------------------------------------

ALL_ADVERSARIES = [
    AdversarySpec('max-delay'),
    AdversarySpec('uniform-random', seed=7),
    AdversarySpec('edge-biased', seed=3),
    AdversarySpec('lifo-queue'),
]


@pytest.fixture(params=ALL_ADVERSARIES, ids=lambda spec: spec.kind)
def adversary(request):
    return request.param


@pytest.fixture
def max_delay():
    return AdversarySpec('max-delay')


# ---------------------------------------------------------------------------
# Covers
# ---------------------------------------------------------------------------


@pytest.fixture
def layered_for():
    """Factory: a layered cover of g with layers 0..top."""
    def build(g: NetworkGraph, top: int, shift: int = 1):
        layered, _ = build_layered_cover(g, top, shift=shift)
        return layered
    return build
