import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import TableObjective
from randsearch.estimators import (EstimatePair, HelperSpec, Regime, VrState, VrSymmetricEstimator,
                                   VrTwoSnapshotEstimator, exact_pair, helper_pair, make_estimator,
                                   minibatch_pair, shift_residual_grid, translation_gap, vr_pair_symmetric,
                                   vr_pair_two_snapshot)
from randsearch.search import sign


def _seed_drawing(first, n):
    # first seed whose generator draws `first` as the first of n indices
    return next(s for s in range(1000) if np.random.default_rng(s).integers(0, n, size=1)[0] == first)


def test_minibatch_lookup_example():
    obj = TableObjective([1.0, 2.0, 3.0])
    seed = _seed_drawing(1, 3)
    p = minibatch_pair(obj, np.array([1.0]), np.array([0.0]), 1, np.random.default_rng(seed))
    assert (p.m_plus, p.m_minus, p.queries) == (2.0, 0.0, 2)


def test_minibatch_full_enumeration_is_exact(quadratic, rng):
    xp, xm = rng.standard_normal((2, quadratic.dim))
    p = minibatch_pair(quadratic, xp, xm, quadratic.n, rng, full_enumeration=True)
    assert p.m_plus == pytest.approx(quadratic.full_value(xp), rel=1e-14)
    assert p.m_minus == pytest.approx(quadratic.full_value(xm), rel=1e-14)


def test_minibatch_rejects_zero_batch(quadratic, rng):
    with pytest.raises(ValueError):
        minibatch_pair(quadratic, np.zeros(10), np.zeros(10), 0, rng)


@pytest.mark.parametrize("b", [1, 4, 16])
def test_minibatch_error_bound(quadratic, rng, b):
    # the constructed quadratic has value noise exactly 0.5 on the unit sphere
    x = np.full(10, 1 / math.sqrt(10))
    f = quadratic.full_value(x)
    errs = [abs(minibatch_pair(quadratic, x, -x, b, rng).m_plus - f) for _ in range(10_000)]
    assert np.mean(errs) <= 0.5 / math.sqrt(b) * (1 + 3 / math.sqrt(10_000))


def test_common_random_numbers_reduce_variance(logistic, rng):
    x = 0.2 * rng.standard_normal(logistic.dim)
    s = rng.standard_normal(logistic.dim)
    s /= np.linalg.norm(s)
    xp, xm = x + 0.01 * s, x - 0.01 * s
    shared = [minibatch_pair(logistic, xp, xm, 4, rng).diff for _ in range(3000)]
    indep = [minibatch_pair(logistic, xp, xp, 4, rng).m_plus - minibatch_pair(logistic, xm, xm, 4, rng).m_minus
             for _ in range(3000)]
    assert np.var(shared) <= np.var(indep)


def test_vr_symmetric_boundary_exact_and_cost(quadratic, rng):
    st_ = VrState(3)
    xp, xm = rng.standard_normal((2, quadratic.dim))
    p = vr_pair_symmetric(quadratic, xp, xm, 4, st_, rng)
    assert (p.m_plus, p.m_minus) == (quadratic.full_value(xp), quadratic.full_value(xm))
    assert p.queries == 2 * quadratic.n
    assert p.nominal_queries == quadratic.n
    assert st_.iter_in_epoch == 1


def test_vr_symmetric_mid_epoch_matches_minibatch(quadratic):
    st_ = VrState(4, iter_in_epoch=2)
    xp, xm = np.ones(10), -np.ones(10)
    a = vr_pair_symmetric(quadratic, xp, xm, 5, st_, np.random.default_rng(7))
    b = minibatch_pair(quadratic, xp, xm, 5, np.random.default_rng(7))
    assert (a.m_plus, a.m_minus, a.queries) == (b.m_plus, b.m_minus, b.queries)


def test_vr_refreshes_every_m(quadratic, rng):
    est = VrSymmetricEstimator(4, 3)
    costs = [est(quadratic, np.ones(10), -np.ones(10), rng).queries for _ in range(7)]
    full = 2 * quadratic.n
    assert costs == [full, 8, 8, full, 8, 8, full]


def test_two_snapshot_cancels_at_snapshot(quadratic, rng):
    st_ = VrState(5)
    xp, xm = rng.standard_normal((2, quadratic.dim))
    vr_pair_two_snapshot(quadratic, xp, xm, 3, st_, rng)
    p = vr_pair_two_snapshot(quadratic, xp, xm, 3, st_, rng)
    assert (p.m_plus, p.m_minus) == (quadratic.full_value(xp), quadratic.full_value(xm))
    assert p.queries == 12


def test_two_snapshot_full_enumeration_exact(quadratic, rng):
    st_ = VrState(5)
    vr_pair_two_snapshot(quadratic, np.ones(10), -np.ones(10), 3, st_, rng)
    xp, xm = rng.standard_normal((2, quadratic.dim))
    p = vr_pair_two_snapshot(quadratic, xp, xm, 3, st_, rng, full_enumeration=True)
    assert p.m_plus == pytest.approx(quadratic.full_value(xp), abs=1e-12)
    assert p.m_minus == pytest.approx(quadratic.full_value(xm), abs=1e-12)


def test_two_snapshot_unbiased(quadratic, rng):
    st0 = VrState(50)
    vr_pair_two_snapshot(quadratic, np.zeros(10), np.zeros(10), 2, st0, rng)
    xp = 0.3 * np.ones(10)
    vals = np.array([vr_pair_two_snapshot(quadratic, xp, -xp, 2, VrState(50, 1, st0.snapshot_plus,
                                                                            st0.snapshot_minus,
                                                                            st0.snapshot_value_plus,
                                                                            st0.snapshot_value_minus),
                                          rng).m_plus for _ in range(10_000)])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - quadratic.full_value(xp)) <= 3 * se


def test_two_snapshot_requires_snapshot(quadratic, rng):
    with pytest.raises(RuntimeError):
        vr_pair_two_snapshot(quadratic, np.zeros(10), np.zeros(10), 2, VrState(3, 1), rng)


def test_vr_state_validation():
    with pytest.raises(ValueError):
        VrState(0)
    with pytest.raises(ValueError):
        VrState(3, 3)


def test_helper_delta_zero_exact(quadratic, rng):
    xp, xm = rng.standard_normal((2, quadratic.dim))
    p = helper_pair(quadratic, xp, xm, HelperSpec(0.0), rng)
    assert (p.m_plus, p.m_minus) == (quadratic.full_value(xp), quadratic.full_value(xm))
    assert p.queries == 0 and p.helper_calls == 2 and p.cost == 2


@pytest.mark.parametrize("mode", ["uniform", "gaussian"])
def test_helper_expected_difference_error(quadratic, rng, mode):
    spec = HelperSpec(0.2, mode)
    xp, xm = np.ones(10), np.zeros(10)
    true = quadratic.full_value(xp) - quadratic.full_value(xm)
    errs = np.array([abs(helper_pair(quadratic, xp, xm, spec, rng).diff - true) for _ in range(100_000)])
    assert errs.mean() <= 0.2


def test_helper_sign_separation(quadratic, rng):
    spec = HelperSpec(0.1)
    for _ in range(500):
        xp, xm = rng.standard_normal((2, quadratic.dim))
        df = quadratic.full_value(xp) - quadratic.full_value(xm)
        if abs(df) > 2 * spec.max_perturbation:
            assert sign(helper_pair(quadratic, xp, xm, spec, rng).diff) == sign(df)


def test_helper_rejects_negative_delta():
    with pytest.raises(ValueError):
        HelperSpec(-1.0)


def test_translation_gap_example():
    assert translation_gap(EstimatePair(3.0, 1.0, 0, Regime.EXACT), 2.0, 2.0) == 1.0
    assert shift_residual_grid(3.0, 1.0, 2.0, 2.0) == pytest.approx(2.0, abs=1e-9)


def test_translation_gap_exact_estimates():
    assert translation_gap((1.5, -2.0), 1.5, -2.0) == 0.0


@settings(max_examples=50, deadline=None)
@given(vals=st.tuples(*[st.floats(-5, 5) for _ in range(4)]), c=st.floats(-1e3, 1e3))
def test_translation_invariance_property(vals, c):
    mp, mm, fp, fm = vals
    # below this gap the shifted floats themselves round together
    assume(abs(mp - mm) > 1e-9 * (1 + abs(c)))
    assert sign((mp + c) - (mm + c)) == sign(mp - mm)
    g0 = translation_gap((mp, mm), fp, fm)
    g1 = translation_gap((mp + c, mm + c), fp, fm)
    assert g1 == pytest.approx(g0, abs=1e-9 * (1 + abs(c)))


@settings(max_examples=30, deadline=None)
@given(vals=st.tuples(*[st.floats(-4, 4) for _ in range(4)]))
def test_grid_matches_twice_gap_property(vals):
    mp, mm, fp, fm = vals
    assert shift_residual_grid(mp, mm, fp, fm) == pytest.approx(2 * translation_gap((mp, mm), fp, fm), abs=2e-4)


@pytest.mark.parametrize("name, cls", [("vr-sym", VrSymmetricEstimator), ("vr-snap", VrTwoSnapshotEstimator)])
def test_make_estimator(name, cls):
    est = make_estimator(name, b=3, m=4)
    assert isinstance(est, cls) and est.state.m == 4


def test_make_estimator_helper():
    est = make_estimator("helper", delta=0.3, helper_mode="gaussian")
    assert est.spec.delta == 0.3 and est.spec.mode.value == "gaussian"


def test_exact_pair_cost(quadratic):
    p = exact_pair(quadratic, np.ones(10), np.zeros(10))
    assert p.queries == 2 * quadratic.n and p.m_minus == 0.0
