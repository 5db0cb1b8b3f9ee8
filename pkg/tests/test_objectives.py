import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randsearch.datasets import DataError, load_csv, synthetic_classification
from randsearch.objectives import (TheoryConstants, estimate_constants, make_logistic, make_quadratic)


def test_logistic_origin_is_log2():
    X, y = synthetic_classification(n=40, d=5, seed=1)
    assert make_logistic(X, y, 0.0).full_value(np.zeros(5)) == pytest.approx(math.log(2), abs=1e-15)


def test_logistic_single_sample_large_margin():
    obj = make_logistic(np.array([[1.0, 0.0]]), np.array([1.0]), 0.0)
    assert obj.full_value(np.array([10.0, 0.0])) == pytest.approx(math.log1p(math.exp(-10.0)), rel=1e-12)


def test_logistic_stable_for_huge_margins():
    obj = make_logistic(np.array([[1.0], [1.0]]), np.array([1.0, -1.0]), 0.0)
    v = obj.component_values([0, 1], np.array([1e4]))
    assert v[0] == 0.0
    assert v[1] == pytest.approx(1e4)


def test_logistic_gradient_matches_finite_differences(logistic, rng):
    for _ in range(3):
        x = 0.3 * rng.standard_normal(logistic.dim)
        h = 1e-6
        fd = np.array([(logistic.full_value(x + h * e) - logistic.full_value(x - h * e)) / (2 * h)
                       for e in np.eye(logistic.dim)])
        g = logistic.full_gradient(x)
        assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


@pytest.mark.parametrize("labels", [[1.0, 2.0], [0.0, 1.0]])
def test_logistic_rejects_bad_labels(labels):
    with pytest.raises(ValueError):
        make_logistic(np.ones((2, 3)), np.array(labels), 1.0)


def test_logistic_rejects_empty():
    with pytest.raises(ValueError):
        make_logistic(np.ones((0, 3)), np.ones(0), 1.0)


def test_full_value_is_component_mean(logistic, rng):
    x = rng.standard_normal(logistic.dim)
    comps = [logistic.component_value(i, x) for i in range(logistic.n)]
    assert abs(logistic.full_value(x) - math.fsum(comps) / logistic.n) <= 1e-10 * logistic.n


def test_quadratic_minimum_and_value():
    q = make_quadratic(np.ones(2), 0.3, 10, 0)
    assert q.full_value(np.zeros(2)) == 0.0
    assert q.full_value(np.array([1.0, 1.0])) == pytest.approx(1.0, abs=1e-12)


def test_quadratic_rejects_nonpositive_diagonal():
    with pytest.raises(ValueError):
        make_quadratic(np.array([1.0, 0.0]), 0.1, 5, 0)


def test_quadratic_noise_calibration(rng):
    q = make_quadratic(np.ones(10), 0.5, 64, rng)
    for _ in range(5):
        x = rng.standard_normal(10)
        x /= np.linalg.norm(x)
        v = q.component_values(np.arange(q.n), x)
        assert np.var(v) == pytest.approx(0.25, rel=0.10)


def test_quadratic_gradients_sum_to_full(quadratic, rng):
    x = rng.standard_normal(quadratic.dim)
    assert np.allclose(quadratic.full_gradient(x), x, atol=1e-12)


def test_adaptive_smoothness_on_quadratic(quadratic, rng):
    # L0 = max diagonal = 1, L1 = 0
    for _ in range(1000):
        x, y = rng.standard_normal((2, quadratic.dim))
        lhs = abs(quadratic.full_value(y) - quadratic.full_value(x) - quadratic.full_gradient(x) @ (y - x))
        assert lhs <= 0.5 * np.sum(np.square(y - x)) + 1e-12


def test_minibatch_mean_unbiased_by_enumeration():
    q = make_quadratic(np.ones(3), 1.0, 5, 1)
    x = np.array([0.3, -1.0, 2.0])
    for b in (1, 2):
        means = [q.batch_mean(list(B), x) for B in itertools.product(range(q.n), repeat=b)]
        assert np.mean(means) == pytest.approx(q.full_value(x), abs=1e-12)


def test_estimate_constants_quadratic(rng):
    q = make_quadratic(np.ones(10), 0.5, 64, rng)
    c = estimate_constants(q, 50, rng, f_star=0.0)
    assert c.L0 == pytest.approx(1.0, abs=0.05)
    assert c.L1 == pytest.approx(0.0, abs=0.05)
    assert c.sigma0 == pytest.approx(0.5, abs=0.1)
    assert c.estimated


def test_estimate_constants_logistic_nonnegative(rng):
    X, y = synthetic_classification(n=60, d=4, seed=2)
    c = estimate_constants(make_logistic(X, y, 0.0), 20, rng)
    assert c.L1 >= 0 and c.L0 >= 0 and c.G > 0


def test_constants_reject_negative():
    with pytest.raises(ValueError):
        TheoryConstants(L0=-1, L1=0, G=0, sigma0=0, sigma1=0, F0=0, mu_D=0.1)


def test_load_csv_maps_01_labels(tmp_path, caplog):
    p = tmp_path / "d.csv"
    p.write_text("a,b,label\n1,2,0\n3,4,1\n5,7,1\n")
    X, y = load_csv(p, standardize_features=False)
    assert "mapped" in caplog.text
    assert y.tolist() == [-1.0, 1.0, 1.0]
    assert X.shape == (3, 2)


@pytest.mark.parametrize("text, where", [
    ("a,b\n1,2\n", "label"),
    ("a,label\n1,1\nx,1\n", "row 3, column 'a'"),
    ("a,label\n1,1\n2\n", "row 3"),
    ("a,label\n1,3\n", "labels"),
])
def test_load_csv_diagnostics(tmp_path, text, where):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataError, match=where):
        load_csv(p)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(0, 5))
def test_full_value_identity_property(seed, lam):
    X, y = synthetic_classification(n=30, d=4, seed=seed)
    obj = make_logistic(X, y, lam)
    x = np.random.default_rng(seed).standard_normal(4) * 3
    assert abs(obj.full_value(x) - obj.component_values(np.arange(30), x).mean()) <= 1e-10 * 30
