import math

import numpy as np
import pytest

import reference as ref
from levy_conditioner import (
    AvoidSet,
    ClockSpec,
    HarmonicFn,
    LevyModel,
    MCConfig,
    PointSet,
    martingale_check,
    rejection_estimator,
    simulate_conditioned,
    transience_diagnostic,
    verify_clock_limit,
)
from levy_conditioner.errors import GridTooCoarse, NoSampler, ZeroDenominator

BM = LevyModel.brownian(1.0)
A01 = PointSet((0.0, 1.0))
FN01 = HarmonicFn(BM, AvoidSet.from_points([0.0, 1.0]))


# --- clock specs ------------------------------------------------------------

def test_clock_factories_validate_their_parameters():
    with pytest.raises(ValueError):
        ClockSpec.exponential(0.0)
    with pytest.raises(ValueError):
        ClockSpec.two_point_hit(1.0)  # needs d or gamma_target
    with pytest.raises(ValueError):
        ClockSpec.two_point_hit(1.0, d=2.0, gamma_target=0.0)
    with pytest.raises(ValueError):
        ClockSpec.two_point_hit(1.0, gamma_target=1.0)
    with pytest.raises(ValueError):
        ClockSpec.inverse_local_time(1.0, -0.5)


def test_two_point_clock_ties_d_to_the_tilt():
    c = ClockSpec.two_point_hit(2.0, gamma_target=0.5)
    assert c.d == pytest.approx(6.0)
    c = ClockSpec.two_point_hit(2.0, d=2.0)
    assert c.gamma_target == pytest.approx(0.0)


# --- clock limits (exact, no Monte Carlo) ------------------------------------

def test_exponential_clock_converges_to_phi_from_below():
    tab = verify_clock_limit(
        BM, A01, 2.0, ClockSpec.exponential(1e-4), 0.0,
        [1e-1, 1e-2, 1e-3, 1e-4],
    )
    assert tab.target == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.diff(tab.value) > 0)
    assert abs(tab.value[-1] - 1.0) < 0.01


def test_one_point_clock_converges_for_both_signs_of_gamma():
    up = verify_clock_limit(
        BM, A01, 2.0, ClockSpec.one_point_hit(100.0), 1.0, [10.0, 30.0, 100.0]
    )
    assert up.target == pytest.approx(2.0, abs=1e-9)
    assert abs(up.value[-1] - 2.0) / 2.0 < 0.02
    down = verify_clock_limit(
        BM, A01, -1.0, ClockSpec.one_point_hit(-100.0), -1.0,
        [-10.0, -30.0, -100.0],
    )
    # gamma=-1 doubles the slope on the left of the set: phi^(-1)(-1) = 2
    assert down.target == pytest.approx(2.0, abs=1e-9)
    assert abs(down.value[-1] - 2.0) / 2.0 < 0.02


def test_one_point_clock_reports_coarse_grid_when_target_vanishes():
    # phi^(-1)(2) = 0: the clock values shrink toward zero so successive
    # grid entries never agree in relative terms.  The honest outcome is
    # GridTooCoarse, not a silent 0-over-0 pass.
    with pytest.raises(GridTooCoarse):
        verify_clock_limit(
            BM, A01, 2.0, ClockSpec.one_point_hit(-100.0), -1.0,
            [-10.0, -30.0, -100.0],
        )


def test_two_point_clock_hits_the_tilted_target():
    tab = verify_clock_limit(
        BM, A01, 2.0, ClockSpec.two_point_hit(50.0, gamma_target=0.5), 0.5,
        [10.0, 20.0, 50.0],
    )
    # phi^(1/2)(2) = phi^0(2) + 0.5*(2 - E[anchor]) = 1 + 0.5 = 1.5
    assert tab.target == pytest.approx(1.5, abs=1e-9)
    assert abs(tab.value[-1] - 1.5) / 1.5 < 0.05


def test_inverse_local_time_clock_discounts_by_expected_local_time():
    u = 1.0
    tab = verify_clock_limit(
        BM, A01, 2.0, ClockSpec.inverse_local_time(100.0, u), 1.0,
        [10.0, 30.0, 100.0],
    )
    # at c the discount is exp(-u / ell(c)) with ell(c) = 2(c-1) for {0,1}
    plain = verify_clock_limit(
        BM, A01, 2.0, ClockSpec.one_point_hit(100.0), 1.0, [10.0, 30.0, 100.0]
    )
    for c, v_il, v_oh in zip(tab.parameter, tab.value, plain.value):
        assert v_il == pytest.approx(v_oh * math.exp(-u / (2.0 * (c - 1.0))),
                                     rel=1e-9)


def test_coarse_clock_grid_raises():
    with pytest.raises(GridTooCoarse):
        verify_clock_limit(
            BM, A01, 2.0, ClockSpec.exponential(1.0), 0.0, [10.0, 1.0]
        )


def test_clock_grid_direction_and_tilt_are_validated():
    with pytest.raises(ValueError):
        verify_clock_limit(BM, A01, 2.0, ClockSpec.exponential(1e-2), 0.0,
                           [1e-4, 1e-2])  # increasing q
    with pytest.raises(ValueError):
        verify_clock_limit(BM, A01, 2.0, ClockSpec.one_point_hit(10.0), 0.5,
                           [5.0, 10.0])  # one-sided clock needs gamma = +-1
    with pytest.raises(ValueError):
        verify_clock_limit(BM, A01, 2.0, ClockSpec.one_point_hit(10.0), 1.0,
                           [1.5, 10.0])  # c inside (set hull, x) forbidden
    with pytest.raises(ValueError):
        verify_clock_limit(BM, A01, 2.0,
                           ClockSpec.two_point_hit(10.0, gamma_target=0.5),
                           0.0, [5.0, 10.0])  # gamma must match the clock


def test_clock_rows_report_estimate_target_and_params():
    tab = verify_clock_limit(
        BM, A01, 2.0, ClockSpec.exponential(1e-3), 0.0, [1e-2, 1e-3]
    )
    rows = tab.rows()
    assert len(rows) == 2
    for row in rows:
        assert set(row) == {"check", "params", "estimate", "stderr", "target", "z"}
        assert row["check"] == "clock_Ex"
        assert row["target"] == pytest.approx(1.0, abs=1e-9)


# --- weighted ensembles -------------------------------------------------------

def test_mean_weight_is_one_within_three_sigma():
    mc = MCConfig(n_paths=20_000, root_seed=2)
    ens = simulate_conditioned(BM, FN01, 2.0, 1.0, mc)
    mean, se = ens.mean_weight()
    assert abs(mean - 1.0) < 3.0 * se
    assert se < 0.02


def test_absorbed_paths_carry_exactly_zero_weight():
    mc = MCConfig(n_paths=5_000, root_seed=2)
    ens = simulate_conditioned(BM, FN01, 1.2, 1.0, mc)
    assert ens.absorbed.sum() > 0
    assert np.all(ens.weights[ens.absorbed, -1] == 0.0)
    assert np.all(ens.survival[~ens.absorbed, -1] > 0.0)


def test_time_zero_snapshot_is_exact():
    mc = MCConfig(n_paths=256, root_seed=2)
    ens = simulate_conditioned(BM, FN01, 2.0, 0.0, mc)
    np.testing.assert_allclose(ens.values[:, 0], 2.0)
    np.testing.assert_allclose(ens.weights[:, 0], 1.0)


def test_stderr_shrinks_with_the_square_root_of_paths():
    se = []
    for n in (5_000, 20_000):
        mc = MCConfig(n_paths=n, root_seed=2)
        ens = simulate_conditioned(BM, FN01, 2.0, 1.0, mc)
        se.append(ens.mean_weight()[1])
    assert se[0] / se[1] == pytest.approx(2.0, rel=0.25)


def test_simulation_from_the_avoided_set_raises():
    mc = MCConfig(n_paths=128, root_seed=2)
    with pytest.raises(ZeroDenominator):
        simulate_conditioned(BM, FN01, 1.0, 0.5, mc)


def test_ensemble_is_identical_across_thread_counts():
    mc = MCConfig(n_paths=10_000, root_seed=9)
    a = simulate_conditioned(BM, FN01, 2.0, 1.0, mc, threads=1)
    b = simulate_conditioned(BM, FN01, 2.0, 1.0, mc, threads=4)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_constant_function_expectation_is_exactly_one():
    mc = MCConfig(n_paths=5_000, root_seed=2)
    ens = simulate_conditioned(BM, FN01, 2.0, 1.0, mc)
    est, se = ens.expectation(lambda v: np.ones_like(v))
    assert est == 1.0
    assert se == 0.0


def test_martingale_check_is_clean_for_a_correct_model():
    mc = MCConfig(n_paths=20_000, root_seed=2)
    rows = martingale_check(BM, FN01, 2.0, [0.5, 1.0, 2.0], mc)
    assert [r["params"]["t"] for r in rows] == [0.5, 1.0, 2.0]
    for r in rows:
        assert abs(r["z"]) < 3.0
        assert r["target"] == pytest.approx(1.0, abs=1e-9)


def test_martingale_check_flags_an_inconsistent_user_model():
    # claimed exponent lam^2/2 (sigma = 1) but increments sampled with
    # variance 2 delta: phi is harmonic for the wrong process
    lying = LevyModel.from_exponent(
        lambda lam: 0.5 * lam * lam,
        sampler=lambda delta, rng, size: rng.standard_normal(size)
        * math.sqrt(2.0 * delta),
    )
    fn = HarmonicFn(lying, AvoidSet.from_points([0.0, 1.0]))
    mc = MCConfig(n_paths=30_000, root_seed=2)
    rows = martingale_check(lying, fn, 2.0, [1.0, 2.0], mc)
    assert max(abs(r["z"]) for r in rows) > 4.0


def test_transience_diagnostic_shows_monotone_escape():
    mc = MCConfig(n_paths=20_000, root_seed=2)
    rows = transience_diagnostic(BM, FN01, 2.0, mc, times=(0.5, 1.0, 2.0))
    by_check = {}
    for r in rows:
        by_check.setdefault(r["check"], []).append(r)
    assert by_check["transience_absorbed_mass"][0]["estimate"] == 0.0
    for r in by_check["transience_inverse_phi_decrease"]:
        assert r["passed"]
        assert r["estimate"] > 3.0 * r["stderr"]
    med = [r["estimate"] for r in by_check["transience_median_abs"]]
    assert med == sorted(med)
    assert by_check["transience_median_increase"][0]["passed"]


# --- rejection estimator ------------------------------------------------------

def test_rejection_estimator_agrees_with_weighted_estimator():
    mc = MCConfig(n_paths=20_000, root_seed=4)
    ind = lambda v: (np.asarray(v) > 2.0).astype(float)
    est_r, se_r = rejection_estimator(BM, A01, 2.0, 1.0, ind, q=1e-3, mc=mc)
    ens = simulate_conditioned(BM, FN01, 2.0, 1.0, mc)
    est_w, se_w = ens.expectation(ind)
    assert abs(est_r - est_w) < 3.0 * math.hypot(se_r, se_w)


def test_rejection_estimator_requires_a_brownian_sampler_path():
    mc = MCConfig(n_paths=1_000, root_seed=4)
    with pytest.raises(NoSampler):
        rejection_estimator(
            LevyModel.symmetric_stable(1.5), A01, 2.0, 1.0,
            lambda v: np.asarray(v), q=1e-3, mc=mc,
        )


def test_rejection_estimator_rejects_starts_on_the_set():
    mc = MCConfig(n_paths=1_000, root_seed=4)
    with pytest.raises(ValueError):
        rejection_estimator(BM, A01, 1.0, 1.0, lambda v: np.asarray(v), mc=mc)
