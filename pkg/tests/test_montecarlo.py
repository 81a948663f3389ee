import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghzdist.models import DomainError, NetworkParams
from ghzdist.montecarlo import (
    CHUNK,
    estimate_fidelity_from_trials,
    iter_repeater_batches,
    simulate_max_geometric,
    simulate_parent,
    simulate_repeater,
)
from ghzdist.network import expected_stage_waits, repeater_fidelity
from ghzdist.parent import expected_residual_wait, expected_rounds_all_links, source_based_fidelity
from ghzdist.repeater import RateModel, teleport_expected_time


def params(n=3, q=0.5, qb=0.9, **kw):
    return NetworkParams(n_users=n, q_link=q, q_bsm=qb, **kw)


class TestMaxGeometric:
    def test_certain(self):
        est = simulate_max_geometric(1, 1.0, 1000, 1)
        assert est.mean == 1.0 and est.std_error == 0.0

    def test_two_links_half(self):
        est = simulate_max_geometric(2, 0.5, 300_000, 2024)
        assert est.within(8 / 3, 3)

    def test_five_links_low_probability(self):
        est = simulate_max_geometric(5, 0.1, 300_000, 3)
        assert abs(est.mean / expected_rounds_all_links(5, 0.1) - 1) < 0.01

    @pytest.mark.parametrize("workers", [2, 8])
    def test_worker_count_does_not_change_result(self, workers):
        trials = 3 * CHUNK + 17
        assert simulate_max_geometric(3, 0.3, trials, 5, workers) == simulate_max_geometric(3, 0.3, trials, 5, 1)

    def test_seed_changes_result(self):
        assert simulate_max_geometric(3, 0.3, 5000, 1).mean != simulate_max_geometric(3, 0.3, 5000, 2).mean

    @pytest.mark.parametrize("trials", [0, -3, 2.5])
    def test_bad_trials(self, trials):
        with pytest.raises(DomainError):
            simulate_max_geometric(3, 0.3, trials, 1)


class TestParent:
    @pytest.mark.parametrize("kind", ["source", "measurement"])
    def test_certain_links(self, kind):
        est, waits = simulate_parent(params(q=1.0), kind, 1000, 1)
        assert est.mean == 1.0 and not waits.any()

    def test_memoryless_mean(self):
        est, _ = simulate_parent(params(q=0.5), "measurement", 200_000, 4)
        assert est.within(8.0, 4)

    def test_memory_assisted_waits(self):
        p = params(n=2, q=0.5)
        est, waits = simulate_parent(p, "source", 200_000, 4)
        assert est.within(8 / 3, 4)
        assert waits.shape == (200_000, 2)
        assert (waits.min(axis=1) == 0).all()
        # per-link residual wait mean vs E[max] - 1/q
        assert waits.mean() == pytest.approx(expected_residual_wait(2, 0.5), abs=0.01)
        # residual of the faster link: P(wait = j) for j >= 1 is 2 q^2 (1-q)^j / (1 - (1-q)^2)
        w = waits.max(axis=1)
        for j in (1, 2, 3):
            expect = 2 * 0.25 * 0.5**j / 0.75
            assert np.mean(w == j) == pytest.approx(expect, abs=0.005)


class TestRepeater:
    def test_level_one_equals_parent(self):
        p = params()
        est_r, _ = simulate_repeater(p, 1, 50_000, 9)
        t_tel = teleport_expected_time(3, 0.9)
        assert est_r.mean == pytest.approx(expected_rounds_all_links(3, 0.5) * t_tel, rel=0.02)
        p1 = params(qb=1.0)
        est_r, _ = simulate_repeater(p1, 1, 50_000, 9)
        est_p, _ = simulate_parent(p1, "source", 50_000, 9)
        assert est_r.mean == pytest.approx(est_p.mean, rel=0.02)

    @pytest.mark.parametrize("level", [1, 2, 3])
    def test_all_success_is_minimal(self, level):
        est, _ = simulate_repeater(params(q=1.0, qb=1.0), level, 2000, 1)
        assert est.mean == 1.0 and est.std_error == 0

    def test_level_two_matches_renewal(self):
        p = params(qb=1.0)
        est, _ = simulate_repeater(p, 2, 100_000, 12)
        assert est.within(RateModel(p, "renewal").expected_t_max(2), 4)

    @pytest.mark.parametrize("mode", ["destroy", "retry"])
    def test_record_shapes(self, mode):
        p = params(n=2)
        _, recs = simulate_repeater(p, 3, 10, 1, bsm_failure=mode)
        r = next(iter(recs))
        assert [w.shape for w in r.per_node_wait] == [(4, 2), (2, 2), (1, 2)]
        assert [a.shape for a in r.per_fusion_bsm_attempts] == [(4,), (2,), (1,)]

    def test_retry_never_slower(self):
        p = params(qb=0.7)
        d, _ = simulate_repeater(p, 2, 50_000, 3, bsm_failure="destroy")
        r, _ = simulate_repeater(p, 2, 50_000, 3, bsm_failure="retry")
        assert r.mean < d.mean

    def test_records_reproducible(self):
        p = params(n=2)
        _, a = simulate_repeater(p, 2, 300, 77)
        _, b = simulate_repeater(p, 2, 300, 77)
        ra, rb = list(a), list(b)
        assert len(ra) == 300
        assert [x.total_rounds for x in ra] == [x.total_rounds for x in rb]

    def test_record_totals_match_estimate(self):
        p = params(n=2)
        est, recs = simulate_repeater(p, 2, 500, 5)
        assert np.mean([r.total_rounds for r in recs]) == pytest.approx(est.mean)

    def test_bad_mode(self):
        with pytest.raises(DomainError):
            simulate_repeater(params(), 2, 10, 1, bsm_failure="maybe")


class TestFidelityFromTrials:
    def test_noiseless(self):
        p = params(p_bsm=1.0, p_mem=0.9, q=1.0, qb=1.0)
        _, recs = simulate_repeater(p, 2, 100, 1)
        assert estimate_fidelity_from_trials(recs, p).mean == pytest.approx(1.0)

    @pytest.mark.parametrize("level", [1, 2])
    def test_perfect_memory_is_deterministic(self, level):
        p = params(p_bsm=0.97, p_mem=1.0, nesting_level=level)
        _, recs = simulate_repeater(p, level, 2000, 3)
        est = estimate_fidelity_from_trials(recs, p)
        assert est.std_error == pytest.approx(0.0, abs=1e-13)
        assert est.mean == pytest.approx(repeater_fidelity(p), abs=1e-12)

    def test_level_one_matches_exact_waits(self):
        p = params(p_bsm=0.95, p_mem=0.99, f_src=0.98)
        batches = list(iter_repeater_batches(p, 1, 2000, 8))
        est = estimate_fidelity_from_trials(batches, p)
        direct = np.mean([source_based_fidelity(p, list(w[0])) for w in batches[0].waits[0]])
        assert est.mean == pytest.approx(direct, abs=1e-12)

    def test_records_and_batches_agree(self):
        p = params(p_mem=0.99, nesting_level=2)
        batches = list(iter_repeater_batches(p, 2, 700, 2))
        recs = [r for b in batches for r in b.records()]
        a = estimate_fidelity_from_trials(batches, p)
        b = estimate_fidelity_from_trials(recs, p)
        assert a.mean == pytest.approx(b.mean, abs=1e-12)

    @pytest.mark.parametrize("level", [1, 2])
    def test_mean_wait_model_close(self, level):
        p = params(p_mem=0.995, p_bsm=0.99, nesting_level=level)
        _, recs = simulate_repeater(p, level, 20_000, 4)
        est = estimate_fidelity_from_trials(recs, p)
        assert est.mean == pytest.approx(repeater_fidelity(p), abs=2e-3)

    def test_empty(self):
        with pytest.raises(DomainError):
            estimate_fidelity_from_trials([], params())


class TestStageWaits:
    def test_mean_waits_match_simulation(self):
        p = params(nesting_level=2, p_mem=0.99)
        waits = expected_stage_waits(p)
        batch = next(iter_repeater_batches(p, 2, 50_000, 21))
        assert batch.waits[0].mean() == pytest.approx(waits[0], rel=0.03)
        assert batch.waits[1].mean() == pytest.approx(waits[1], rel=0.03)

    def test_measurement_parent_has_no_level_one_wait(self):
        assert expected_stage_waits(params(parent_kind="measurement"))[0] == 0.0


@given(st.integers(2, 4), st.floats(0.2, 1.0), st.integers(0, 2**32))
def test_max_geometric_bounds(n, q, seed):
    est = simulate_max_geometric(n, q, 200, seed)
    assert est.mean >= 1.0
    assert est.trials == 200
