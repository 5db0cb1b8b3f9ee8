"""Finite-sum objectives with component-wise access.

Values are what the optimizers see. Gradients exist only for diagnostics,
tests and the instrumentation ledger; no optimizer in this package reads them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sopt
from scipy.special import expit

__all__ = [
    "FiniteSumObjective",
    "LogisticObjective",
    "QuadraticObjective",
    "ShiftedObjective",
    "TheoryConstants",
    "make_logistic",
    "make_quadratic",
    "estimate_constants",
]


class FiniteSumObjective:
    """``f(x) = (1/n) sum_i f_i(x)``.

    Subclasses implement :meth:`_values` and :meth:`_gradients`, both
    vectorized over a set of component indices. ``x`` may be a single point
    of shape ``(d,)`` or a stack of points ``(k, d)``.
    """

    n: int
    dim: int
    #: known optimal value, if any
    f_star: float | None = None

    def _values(self, idx: np.ndarray, X: np.ndarray) -> np.ndarray:  # (len(idx), k)
        raise NotImplementedError

    def _gradients(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:  # (len(idx), d)
        raise NotImplementedError

    def _points(self, x):
        X = np.asarray(x, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"point dimension {X.shape[1]} != objective dimension {self.dim}")
        return X, single

    def component_values(self, idx, x) -> np.ndarray:
        X, single = self._points(x)
        vals = self._values(np.asarray(idx, dtype=np.intp), X)
        return vals[:, 0] if single else vals

    def component_value(self, i: int, x) -> float:
        return float(self.component_values([i], x)[0])

    def batch_mean(self, idx, x):
        """Minibatch objective ``F_B(x)``; an array when ``x`` is a stack of points."""
        X, single = self._points(x)
        vals = self._values(np.asarray(idx, dtype=np.intp), X).mean(axis=0)
        return float(vals[0]) if single else vals

    def full_value(self, x):
        return self.batch_mean(np.arange(self.n), x)

    def component_gradients(self, idx, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self._gradients(np.asarray(idx, dtype=np.intp), x)

    def component_gradient(self, i: int, x) -> np.ndarray:
        return self.component_gradients([i], x)[0]

    def full_gradient(self, x) -> np.ndarray:
        return self.component_gradients(np.arange(self.n), x).mean(axis=0)

    def shifted(self, c: float) -> "ShiftedObjective":
        return ShiftedObjective(self, c)


class LogisticObjective(FiniteSumObjective):
    """Regularized logistic loss; the ridge term is split evenly across components."""

    def __init__(self, features, labels, lam: float = 1.0):
        A = np.asarray(features, dtype=float)
        y = np.asarray(labels, dtype=float)
        if A.ndim != 2:
            raise ValueError("features must be an n x d matrix")
        if A.shape[0] == 0:
            raise ValueError("empty dataset")
        if y.shape != (A.shape[0],):
            raise ValueError(f"labels shape {y.shape} does not match {A.shape[0]} rows")
        if not np.all((y == 1.0) | (y == -1.0)):
            bad = np.unique(y[(y != 1.0) & (y != -1.0)])
            raise ValueError(f"labels must be +1 or -1, found {bad[:5].tolist()}")
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        self.A = A
        self.y = y
        self.lam = float(lam)
        self.n, self.dim = A.shape
        self._ya = y[:, None] * A

    def _ridge(self, X):
        return self.lam / (2.0 * self.n) * np.einsum("kd,kd->k", X, X)

    def _values(self, idx, X):
        margins = self._ya[idx] @ X.T
        # logaddexp(0, -m) = log(1 + exp(-m)) without overflow
        return np.logaddexp(0.0, -margins) + self._ridge(X)[None, :]

    def _gradients(self, idx, x):
        ya = self._ya[idx]
        w = expit(-(ya @ x))
        return -w[:, None] * ya + (self.lam / self.n) * x[None, :]

    def full_value(self, x):
        X, single = self._points(x)
        vals = np.logaddexp(0.0, -(self._ya @ X.T)).mean(axis=0) + self._ridge(X)
        return float(vals[0]) if single else vals

    def full_gradient(self, x):
        x = np.asarray(x, dtype=float)
        w = expit(-(self._ya @ x))
        return -(w @ self._ya) / self.n + (self.lam / self.n) * x


class QuadraticObjective(FiniteSumObjective):
    """``f_i(x) = 0.5 x^T diag(a) x + <b_i, x>`` with ``sum_i b_i = 0``; minimum 0 at 0."""

    f_star = 0.0

    def __init__(self, a_diag, offsets):
        self.a = np.asarray(a_diag, dtype=float)
        self.B = np.asarray(offsets, dtype=float)
        self.n, self.dim = self.B.shape
        self._bbar = self.B.mean(axis=0)

    def _values(self, idx, X):
        quad = 0.5 * np.einsum("kd,d,kd->k", X, self.a, X)
        return quad[None, :] + self.B[idx] @ X.T

    def _gradients(self, idx, x):
        return (self.a * x)[None, :] + self.B[idx]

    def full_value(self, x):
        X, single = self._points(x)
        vals = 0.5 * np.einsum("kd,d,kd->k", X, self.a, X) + X @ self._bbar
        return float(vals[0]) if single else vals

    def full_gradient(self, x):
        return self.a * np.asarray(x, dtype=float) + self._bbar


class ShiftedObjective(FiniteSumObjective):
    """``f + c``: every component shifted by the same constant."""

    def __init__(self, base: FiniteSumObjective, c: float):
        self.base = base
        self.c = float(c)
        self.n, self.dim = base.n, base.dim
        self.f_star = None if base.f_star is None else base.f_star + self.c

    def _values(self, idx, X):
        return self.base._values(idx, X) + self.c

    def _gradients(self, idx, x):
        return self.base._gradients(idx, x)

    def full_value(self, x):
        return self.base.full_value(x) + self.c

    def full_gradient(self, x):
        return self.base.full_gradient(x)


def make_logistic(features, labels, lam: float = 1.0) -> LogisticObjective:
    return LogisticObjective(features, labels, lam)


def make_quadratic(a_diag, noise_sigma: float, n: int, rng, probe_radius: float = 1.0) -> QuadraticObjective:
    """Quadratic finite sum with calibrated value noise.

    The offsets are built so that ``(1/n) sum_i <b_i, x>^2 = noise_sigma^2``
    exactly for every ``x`` with ``||x|| = probe_radius`` (needs ``n > d``;
    otherwise the calibration holds on average over directions only).
    """
    a = np.asarray(a_diag, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("a_diag must be a nonempty vector")
    if np.any(a <= 0):
        raise ValueError("quadratic diagonal must be strictly positive")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    d = a.size
    n = int(n)
    if n < 1:
        raise ValueError("need at least one component")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    scale = noise_sigma / probe_radius
    Z = rng.standard_normal((n, d))
    Z -= Z.mean(axis=0)
    if n > d:
        Q, _ = np.linalg.qr(Z)
        B = Q * (math.sqrt(n) * scale)
    else:
        # rank-deficient: match the trace only
        norm2 = np.square(Z).sum() / n
        B = Z * (scale * math.sqrt(d / norm2)) if norm2 > 0 else np.zeros_like(Z)
    return QuadraticObjective(a, B)


@dataclass
class TheoryConstants:
    """Constants entering the planned step sizes and batch sizes.

    Values produced by :func:`estimate_constants` are sample-based lower
    bounds of the true suprema (``estimated=True``) and only heuristics.
    """

    L0: float
    L1: float
    G: float
    sigma0: float
    sigma1: float
    F0: float
    mu_D: float
    estimated: bool = False
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name in ("L0", "L1", "G", "sigma0", "sigma1", "F0", "mu_D"):
            v = getattr(self, name)
            if not (v >= 0) or math.isnan(v):
                raise ValueError(f"{name} must be nonnegative, got {v}")


def _estimate_fstar(obj: FiniteSumObjective, x0: np.ndarray) -> float:
    res = sopt.minimize(obj.full_value, x0, jac=obj.full_gradient, method="L-BFGS-B",
                        options={"maxiter": 2000, "gtol": 1e-10})
    return float(min(res.fun, obj.full_value(x0)))


def estimate_constants(obj: FiniteSumObjective, probe_points: int, rng, x0=None,
                       radius: float = 1.0, mu_D: float | None = None,
                       f_star: float | None = None) -> TheoryConstants:
    """Sample-based estimates of ``L0, L1, G, sigma0, sigma1, F0``.

    Probe points are drawn uniformly on the sphere of ``radius`` around
    ``x0``. ``(L0, L1)`` come from a nonnegative least-squares fit of the
    local gradient-Lipschitz ratio against ``||grad f||``, raised so the fitted
    line covers every observed ratio. ``mu_D`` falls back to
    ``sqrt(2 / (pi d))`` when not supplied.
    """
    from .directions import fallback_mu

    if probe_points < 2:
        raise ValueError("need at least two probe points")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    d, n = obj.dim, obj.n
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    P = rng.standard_normal((probe_points, d))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    P = x0 + radius * P

    all_idx = np.arange(n)
    grads = np.array([obj.full_gradient(p) for p in P])
    gnorm = np.linalg.norm(grads, axis=1)
    G = 0.0
    sigma0_sq = 0.0
    sigma1_sq = 0.0
    for p, g in zip(P, grads):
        comp_g = obj.component_gradients(all_idx, p)
        comp_v = obj.component_values(all_idx, p)
        G = max(G, float(np.linalg.norm(comp_g, axis=1).max()))
        sigma0_sq = max(sigma0_sq, float(np.mean(np.square(comp_v - comp_v.mean()))))
        sigma1_sq = max(sigma1_sq, float(np.mean(np.square(comp_g - g).sum(axis=1))))

    # random pairs among probe points (both orders, so the ratio is tied to grad f at x)
    i, j = np.triu_indices(probe_points, k=1)
    i, j = np.concatenate([i, j]), np.concatenate([j, i])
    ratio = np.linalg.norm(grads[i] - grads[j], axis=1) / np.linalg.norm(P[i] - P[j], axis=1)
    design = np.column_stack([np.ones_like(ratio), gnorm[i]])
    (L0, L1), _ = sopt.nnls(design, ratio)
    L0 = max(L0, float(np.max(ratio - L1 * gnorm[i])), 0.0)

    notes = ["lower-bound estimates from %d probe points" % probe_points]
    if f_star is None:
        f_star = obj.f_star
    if f_star is None:
        f_star = _estimate_fstar(obj, x0)
        notes.append("f* estimated by L-BFGS on the full objective")
    F0 = max(float(obj.full_value(x0)) - f_star, 0.0)
    if mu_D is None:
        mu_D = fallback_mu(d)
        notes.append("mu_D from sqrt(2/(pi d)) fallback")
    return TheoryConstants(L0=float(L0), L1=float(L1), G=G, sigma0=math.sqrt(sigma0_sq),
                           sigma1=math.sqrt(sigma1_sq), F0=F0, mu_D=float(mu_D),
                           estimated=True, notes=notes)
