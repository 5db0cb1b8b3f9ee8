import numpy as np
import pytest

from randsearch.datasets import synthetic_classification
from randsearch.objectives import FiniteSumObjective, make_logistic, make_quadratic


class TableObjective(FiniteSumObjective):
    """f_i(x) = coef_i * x[0] + 0.5 * curv * ||x||^2; small hand-checkable finite sum."""

    def __init__(self, coef, dim=1, curv=0.0):
        self.coef = np.asarray(coef, dtype=float)
        self.n = self.coef.size
        self.dim = dim
        self.curv = curv
        self.f_star = None

    def _values(self, idx, X):
        return np.outer(self.coef[idx], X[:, 0]) + 0.5 * self.curv * np.square(X).sum(axis=1)

    def _gradients(self, idx, x):
        g = np.zeros((len(idx), self.dim))
        g[:, 0] = self.coef[idx]
        return g + self.curv * x


class SquaredNorm(FiniteSumObjective):
    """f(x) = ||x||^2 as a one-component sum (matches the hand examples)."""

    def __init__(self, dim=2, shift=0.0):
        self.n, self.dim, self.shift, self.f_star = 1, dim, shift, shift

    def _values(self, idx, X):
        return np.tile(np.square(X).sum(axis=1) + self.shift, (len(idx), 1))

    def _gradients(self, idx, x):
        return np.tile(2 * x, (len(idx), 1))


@pytest.fixture(scope="session")
def logistic():
    X, y = synthetic_classification(seed=0)
    return make_logistic(X, y, 1.0)


@pytest.fixture(scope="session")
def quadratic():
    return make_quadratic(np.ones(10), 0.5, 64, np.random.default_rng(0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
