import math

import numpy as np
import pytest

import reference as ref
from levy_conditioner import (
    LevyModel,
    PointSet,
    finite_set_hitting_limit,
    finite_set_laplace,
    green_normalizers,
    h,
    killed_resolvent,
    local_time_normalizer,
    one_point_laplace,
    resolvent_density,
)
from levy_conditioner.errors import IllConditioned, NegativeProbability
from levy_conditioner.hitting import _pivoted_qr_solve, _solve_hitting_system

BM = LevyModel.brownian(1.0)
STABLE = LevyModel.symmetric_stable(1.5)


def test_point_set_sorts_and_rejects_duplicates():
    A = PointSet((1.0, 0.0, 2.0))
    assert A.points == (0.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        PointSet((0.0, 0.0))
    with pytest.raises(ValueError):
        PointSet(())
    with pytest.raises(ValueError):
        PointSet((0.0, 1e-12))  # closer than the minimum gap


def test_one_point_laplace_is_resolvent_ratio():
    for q, a, x in ((0.5, 0.0, 1.2), (2.0, -1.0, -3.0)):
        want = ref.bm_resolvent(q, a - x) / ref.bm_resolvent(q, 0.0)
        assert one_point_laplace(BM, q, x, a) == pytest.approx(want, abs=1e-12)
    assert one_point_laplace(BM, 0.7, 0.5, 0.5) == 1.0


def test_two_point_laplace_matches_sinh_oracle():
    A = PointSet((0.0, 1.0))
    for q in (0.1, 1.0):
        for x in (-0.7, 0.25, 0.8, 2.0):
            got = finite_set_laplace(BM, q, x, A)
            want = ref.bm_two_point_laplace(q, 0.0, 1.0, x)
            np.testing.assert_allclose(got, want, atol=1e-10)


def test_laplace_vector_is_indicator_on_the_set_itself():
    A = PointSet((0.0, 1.0, 2.0))
    got = finite_set_laplace(BM, 0.5, 1.0, A)
    np.testing.assert_allclose(got, [0.0, 1.0, 0.0], atol=1e-14)


def test_hitting_limit_recovers_gamblers_ruin():
    A = PointSet((0.0, 1.0))
    for x in (0.1, 0.25, 0.5, 0.9):
        sol = finite_set_hitting_limit(BM, x, A)
        assert sol.probs[1] == pytest.approx(ref.bm_ruin(0.0, 1.0, x), abs=1e-12)
        assert sol.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_hitting_limit_from_outside_picks_nearest_point_for_continuous_paths():
    A = PointSet((0.0, 1.0))
    sol = finite_set_hitting_limit(BM, 5.0, A)
    np.testing.assert_allclose(sol.probs, [0.0, 1.0], atol=1e-12)
    sol = finite_set_hitting_limit(BM, -2.0, A)
    np.testing.assert_allclose(sol.probs, [1.0, 0.0], atol=1e-12)


def test_hitting_limit_for_stable_spreads_mass_across_points():
    A = PointSet((0.0, 1.0))
    sol = finite_set_hitting_limit(STABLE, 3.0, A)
    # jumps can carry the path over the near point
    assert 0.0 < sol.probs[0] < sol.probs[1] < 1.0
    assert sol.probs.sum() == pytest.approx(1.0, abs=1e-10)


def test_phi0_vanishes_between_points_for_brownian():
    A = PointSet((0.0, 1.0))
    sol = finite_set_hitting_limit(BM, 0.5, A)
    assert sol.phi0 == pytest.approx(0.0, abs=1e-12)
    sol = finite_set_hitting_limit(BM, 3.0, A)
    assert sol.phi0 == pytest.approx(2.0, abs=1e-12)


def test_killed_resolvent_vanishes_on_the_set_and_is_positive_off_it():
    A = PointSet((0.0, 1.5))
    for m in (BM, STABLE):
        for y in A.points:
            assert abs(killed_resolvent(m, 0.8, 3.0, y, A)) < 1e-12
        assert killed_resolvent(m, 0.8, 3.0, 2.5, A) > 0.0


def test_killed_resolvent_is_symmetric_for_symmetric_models():
    A = PointSet((-1.0, 1.0))
    a = killed_resolvent(BM, 0.5, 2.0, 2.5, A)
    b = killed_resolvent(BM, 0.5, -2.0, -2.5, A)
    assert a == pytest.approx(b, rel=1e-10)


def test_local_time_normalizer_for_brownian_pair():
    # expected local time at 0 before hitting {c} from 0 is 2c for BM
    B = PointSet((-1.0, 1.0))
    # normalizer phi_B(0) + sum p_k h(b_k): symmetric pair gives 2*(1/2)*1 = 1
    assert local_time_normalizer(BM, B) == pytest.approx(1.0, abs=1e-10)


def test_green_normalizers_match_h_sums():
    assert green_normalizers(BM, 2.0) == pytest.approx(4.0, abs=1e-10)
    assert green_normalizers(BM, 1.0, 1.0) == pytest.approx(1.0, abs=1e-8)
    # two-sided with c=1, d=3: 2cd/(c+d) = 1.5 for standard BM
    assert green_normalizers(BM, 1.0, 3.0) == pytest.approx(1.5, abs=1e-8)
    with pytest.raises(ValueError):
        green_normalizers(BM, 0.0)


def test_synthetic_negative_probability_raises():
    # h values violating the triangle structure force a negative weight
    hmat = np.array([[0.0, 1.0], [1.0, 0.0]])
    hvec = np.array([5.0, -3.0])
    with pytest.raises(NegativeProbability):
        _solve_hitting_system(hmat, hvec, 9.0, PointSet((0.0, 1.0)))


def test_singular_matrix_is_rejected_as_ill_conditioned():
    m = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(IllConditioned):
        _pivoted_qr_solve(m, np.ones(3))


def test_nearly_coincident_points_solve_with_large_condition_number():
    A = PointSet((0.0, 1e-8, 1.0))
    sol = finite_set_hitting_limit(BM, 2.0, A)
    assert sol.condition_number > 1e6
    assert sol.probs.sum() == pytest.approx(1.0, abs=1e-6)


def test_hitting_probabilities_shift_with_asymmetric_jumps():
    m = LevyModel.asymmetric_stable(1.5, 0.8)
    A = PointSet((0.0, 1.0))
    sol_pos = finite_set_hitting_limit(m, 3.0, A)
    sol_sym = finite_set_hitting_limit(STABLE, 3.0, A)
    assert sol_pos.probs.sum() == pytest.approx(1.0, abs=1e-10)
    assert sol_pos.probs[0] != pytest.approx(sol_sym.probs[0], abs=1e-3)
