import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from randsearch.directions import (DirectionDistribution, DirectionKind, estimate_mu, fallback_mu,
                                   sample_direction, second_moment_projection)

KINDS = ["sphere", "gaussian", "coordinate"]


def test_sphere_sample_unit_norm(rng):
    s = sample_direction(DirectionDistribution("sphere", 30), rng)
    assert s.vector.shape == (30,)
    assert abs(np.linalg.norm(s.vector) - 1.0) < 1e-12


def test_coordinate_sample_is_signed_basis_vector(rng):
    dist = DirectionDistribution("coordinate", 4)
    basis = np.vstack([np.eye(4), -np.eye(4)])
    for _ in range(50):
        v = sample_direction(dist, rng).vector
        assert any(np.array_equal(v, e) for e in basis)


def test_gaussian_mean_square_norm(rng):
    # Monte Carlo estimate of E||s||^2 for the scaled Gaussian
    S = DirectionDistribution("gaussian", 8).draw(rng, 100_000)
    assert np.mean(np.square(S).sum(axis=1)) == pytest.approx(1.0, abs=0.02)


def test_zero_dimension_rejected():
    with pytest.raises(ValueError):
        DirectionDistribution("sphere", 0)


@pytest.mark.parametrize("kind", KINDS)
def test_mean_square_norm_all_kinds(kind, rng):
    S = DirectionDistribution(kind, 5).draw(rng, 40_000)
    sq = np.square(S).sum(axis=1)
    se = sq.std() / math.sqrt(len(sq)) + 1e-15
    assert abs(sq.mean() - 1.0) <= 4 * se + 1e-12


def test_deterministic_given_generator():
    dist = DirectionDistribution("sphere", 6)
    a = dist.draw(np.random.default_rng(3), 10)
    b = dist.draw(np.random.default_rng(3), 10)
    assert np.array_equal(a, b)


def test_mu_d1_is_one(rng):
    assert estimate_mu(DirectionDistribution("sphere", 1), np.array([-2.5]), 1000, rng) == 1.0


def test_mu_d2_matches_quadrature(rng):
    # E|cos theta| for theta uniform on the circle, by quadrature
    oracle = integrate.quad(lambda t: abs(math.cos(t)), 0, 2 * math.pi)[0] / (2 * math.pi)
    est = estimate_mu(DirectionDistribution("sphere", 2), np.array([1.0, 0.0]), 1_000_000, rng)
    assert est == pytest.approx(oracle, abs=0.005)


def test_mu_d30_follows_inverse_sqrt_d(rng):
    c = np.mean([estimate_mu(DirectionDistribution("sphere", d), np.eye(d)[0], 1_000_000, rng) * math.sqrt(d)
                 for d in (2, 8)])
    est = estimate_mu(DirectionDistribution("sphere", 30), np.eye(30)[0], 1_000_000, rng)
    assert est == pytest.approx(c / math.sqrt(30), rel=0.10)


def test_mu_zero_gradient_raises(rng):
    with pytest.raises(ZeroDivisionError):
        estimate_mu(DirectionDistribution("sphere", 3), np.zeros(3), 10, rng)


def test_mu_isotropy(rng):
    dist = DirectionDistribution("sphere", 6)
    res = [estimate_mu(dist, rng.standard_normal(6), 200_000, rng, return_stderr=True) for _ in range(5)]
    means = np.array([m for m, _ in res])
    se = max(s for _, s in res)
    assert means.max() - means.min() <= 3 * math.sqrt(2) * se


def test_fallback_mu_close_to_large_d_estimate(rng):
    est = estimate_mu(DirectionDistribution("sphere", 200), np.eye(200)[0], 200_000, rng)
    assert est == pytest.approx(fallback_mu(200), rel=0.02)


@pytest.mark.parametrize("d, v, expected", [
    (3, [1.0, 0.0, 0.0], 1 / 3),
    (2, [3.0, 4.0], 12.5),
])
def test_second_moment_projection_examples(d, v, expected, rng):
    est = second_moment_projection(DirectionDistribution("sphere", d), np.array(v), 1_000_000, rng)
    tol = 0.01 if d == 3 else 0.2
    assert est == pytest.approx(expected, abs=tol)


@pytest.mark.parametrize("kind", KINDS)
def test_second_moment_projection_zero_vector(kind, rng):
    assert second_moment_projection(DirectionDistribution(kind, 4), np.zeros(4), 100, rng) == 0.0


@settings(max_examples=15, deadline=None)
@given(d=st.integers(1, 12), seed=st.integers(0, 2 ** 32 - 1))
def test_sphere_projection_property(d, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d) * rng.uniform(0.1, 10)
    est, se = second_moment_projection(DirectionDistribution("sphere", d), v, 50_000, rng, return_stderr=True)
    assert abs(est - v @ v / d) <= 4 * se + 1e-12


@settings(max_examples=25, deadline=None)
@given(kind=st.sampled_from(KINDS), d=st.integers(1, 40), seed=st.integers(0, 2 ** 32 - 1))
def test_unit_norm_property(kind, d, seed):
    S = DirectionDistribution(kind, d).draw(np.random.default_rng(seed), 16)
    assert S.shape == (16, d)
    if kind != "gaussian":
        assert np.allclose(np.linalg.norm(S, axis=1), 1.0, atol=1e-12)
