import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghzdist.models import (
    DepolarizingParam,
    DomainError,
    NetworkParams,
    SwitchKind,
    compose_depolarizing,
    effective_success_probability,
    ghz_weight_from_fidelity,
    link_success_probability,
    memory_keep_after_wait,
)
from ghzdist.oracle import apply_depolarizing, fidelity_with_ghz, ghz_state

probs = st.floats(0.0, 1.0)


class TestLinkProbability:
    def test_zero_length(self):
        assert link_success_probability(0.0, 1.0, 20.0) == 0.5

    def test_zero_coupling(self):
        assert link_success_probability(37.0, 0.0, 20.0) == 0.0

    def test_one_attenuation_length(self):
        assert link_success_probability(20.0, 1.0, 20.0) == pytest.approx(0.5 / math.e, rel=1e-15)
        assert round(link_success_probability(20.0, 1.0, 20.0), 5) == 0.18394

    @pytest.mark.parametrize("args", [(-1.0, 0.9, 20.0), (1.0, 1.1, 20.0), (1.0, 0.9, 0.0),
                                      (math.nan, 0.9, 20.0), (1.0, 0.9, math.inf)])
    def test_rejects(self, args):
        with pytest.raises(DomainError):
            link_success_probability(*args)

    @given(st.floats(0, 500), st.floats(0, 500), probs)
    def test_decreasing_in_length(self, a, b, eta):
        lo, hi = sorted((a, b))
        assert link_success_probability(hi, eta, 20.0) <= link_success_probability(lo, eta, 20.0)


class TestEffectiveProbability:
    def test_examples(self):
        assert effective_success_probability(0.3, 1) == pytest.approx(0.3, abs=1e-15)
        assert effective_success_probability(1.0, 7) == 1.0
        assert effective_success_probability(0.5, 2) == pytest.approx(0.75, abs=1e-15)

    def test_tiny_probability_keeps_precision(self):
        q = 1e-12
        assert effective_success_probability(q, 1000) == pytest.approx(1000 * q, rel=1e-9)

    @pytest.mark.parametrize("a", [0, -1, 1.5, True])
    def test_bad_attempts(self, a):
        with pytest.raises(DomainError):
            effective_success_probability(0.5, a)

    @given(probs, st.integers(1, 200))
    def test_matches_complement_power(self, q, a):
        assert effective_success_probability(q, a) == pytest.approx(1 - (1 - q) ** a, abs=1e-12)

    @given(probs, st.integers(1, 100))
    def test_monotone_in_attempts(self, q, a):
        assert effective_success_probability(q, a + 1) >= effective_success_probability(q, a) - 1e-15


class TestDepolarizing:
    def test_memory_examples(self):
        assert memory_keep_after_wait(0.9, 0).keep == 1.0
        assert memory_keep_after_wait(1.0, 1000).keep == 1.0
        assert memory_keep_after_wait(0.9, 2).keep == pytest.approx(0.81)

    def test_fractional_wait(self):
        assert memory_keep_after_wait(0.81, 0.5).keep == pytest.approx(0.9)

    def test_negative_wait(self):
        with pytest.raises(DomainError):
            memory_keep_after_wait(0.9, -1)

    def test_compose_examples(self):
        assert compose_depolarizing(1.0, 0.3).keep == 0.3
        assert compose_depolarizing(0.0, 0.3).keep == 0.0
        assert compose_depolarizing(0.8, 0.5).keep == pytest.approx(0.4)

    @given(probs, probs)
    def test_compose_matches_channel_sequence(self, a, b):
        once = apply_depolarizing(apply_depolarizing(ghz_state(2), 0, a), 0, b)
        direct = apply_depolarizing(ghz_state(2), 0, compose_depolarizing(a, b))
        assert fidelity_with_ghz(once) == pytest.approx(fidelity_with_ghz(direct), abs=1e-12)

    @pytest.mark.parametrize("bad", [-0.1, 1.1, math.nan])
    def test_keep_range(self, bad):
        with pytest.raises(DomainError):
            DepolarizingParam(bad)

    def test_weight_from_fidelity(self):
        assert ghz_weight_from_fidelity(1.0, 3) == 1.0
        assert ghz_weight_from_fidelity(1 / 8, 3) == 0.0


class TestNetworkParams:
    def test_defaults_valid(self):
        p = NetworkParams()
        assert p.parent_kind is SwitchKind.SOURCE_BASED
        assert 0 < p.q_eff() < 1

    def test_round_trip(self):
        p = NetworkParams(n_users=4, q_link=0.3, parent_kind="measurement")
        assert NetworkParams.from_dict(p.to_dict()) == p

    def test_unknown_field(self):
        with pytest.raises(DomainError):
            NetworkParams.from_dict({"n_user": 3})

    @pytest.mark.parametrize("change", [{"n_users": 1}, {"p_bsm": 1.5}, {"nesting_level": 0},
                                        {"parallel_attempts": 0}, {"delta_t": 0.0},
                                        {"L0_in": -1.0}, {"f_src": 2.0}])
    def test_validation(self, change):
        with pytest.raises(DomainError):
            NetworkParams(**change)

    def test_link_distance_halves_per_level(self):
        p = NetworkParams(L0_in=40.0)
        assert [p.replace(nesting_level=m).link_distance for m in (1, 2, 3)] == [40.0, 20.0, 10.0]

    def test_q_link_override(self):
        p = NetworkParams(q_link=0.25, parallel_attempts=2)
        assert p.link_probability() == 0.25
        assert p.q_eff() == pytest.approx(1 - 0.75**2)
