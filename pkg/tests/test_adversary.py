"""
Unit tests for the delay adversaries.
"""

import pytest

from modules.core.adversary import Adversary, AdversarySpec, adversary_delay, parse_adversary_spec
from modules.core.constants import TICKS_PER_TAU
from modules.core.errors import ConfigError

pytestmark = [pytest.mark.unit]


def _delays(spec, count=200, src=0, dst=1):
    adv = Adversary(spec)
    return [adv.delay(src, dst, 'algorithm', ('default',), 0) for _ in range(count)]


class TestParse:

    def test_kind_and_seed(self):
        spec = parse_adversary_spec('uniform-random:42')
        assert spec.kind == 'uniform-random'
        assert spec.seed == 42

    def test_seed_defaults_to_zero(self):
        assert parse_adversary_spec('max-delay').seed == 0

    @pytest.mark.parametrize('text', ['', 'chaos', 'max-delay:x', 'max-delay:1:2'])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            parse_adversary_spec(text)

    def test_epsilon_range(self):
        with pytest.raises(ConfigError):
            AdversarySpec('edge-biased', epsilon=0)

    def test_str(self):
        assert str(AdversarySpec('lifo-queue', 3)) == 'lifo-queue:3'


class TestDelays:

    def test_every_delay_within_one_tau(self, adversary):
        assert all(1 <= d <= TICKS_PER_TAU for d in _delays(adversary))

    def test_max_delay_is_constant(self):
        assert set(_delays(AdversarySpec('max-delay'))) == {TICKS_PER_TAU}

    def test_uniform_random_is_seeded(self):
        spec = AdversarySpec('uniform-random', seed=11)
        assert _delays(spec) == _delays(spec)
        assert _delays(spec) != _delays(AdversarySpec('uniform-random', seed=12))

    def test_edge_biased_uses_two_speeds(self):
        spec = AdversarySpec('edge-biased', slow_edges=frozenset({(0, 1)}), epsilon=1 / 16)
        adv = Adversary(spec)
        assert adv.delay(1, 0, 'algorithm', ('x',), 0) == TICKS_PER_TAU
        assert adv.delay(1, 2, 'algorithm', ('x',), 0) == TICKS_PER_TAU // 16

    def test_lifo_later_injections_overtake(self):
        delays = _delays(AdversarySpec('lifo-queue'), count=10)
        assert delays == sorted(delays, reverse=True)
        assert delays[0] > delays[-1]

    def test_adversary_delay_in_tau_units(self):
        assert adversary_delay(Adversary(AdversarySpec('max-delay')), 0, 1) == 1.0
