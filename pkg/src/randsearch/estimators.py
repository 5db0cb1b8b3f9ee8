"""Paired value estimates ``(M+, M-)`` for the two trial points.

Every minibatch estimator uses one batch for both points (common random
numbers), drawn i.i.d. with replacement. ``queries`` counts component
evaluations; ``nominal_queries`` follows the accounting of the
variance-reduction complexity formula (``n`` per full pass, ``b`` per
stochastic step) so ``Calls(m)`` can be reproduced as written.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .objectives import FiniteSumObjective

__all__ = [
    "Regime",
    "EstimatePair",
    "VrState",
    "HelperMode",
    "HelperSpec",
    "exact_pair",
    "minibatch_pair",
    "vr_pair_symmetric",
    "vr_pair_two_snapshot",
    "helper_pair",
    "translation_gap",
    "shift_residual_grid",
    "Estimator",
    "ExactEstimator",
    "MinibatchEstimator",
    "VrSymmetricEstimator",
    "VrTwoSnapshotEstimator",
    "HelperEstimator",
    "make_estimator",
]


class Regime(str, enum.Enum):
    EXACT = "exact"
    MINIBATCH = "minibatch"
    VR_SYMMETRIC = "vr-sym"
    VR_SNAPSHOT = "vr-snap"
    HELPER = "helper"


@dataclass(frozen=True)
class EstimatePair:
    m_plus: float
    m_minus: float
    queries: int
    regime: Regime
    helper_calls: int = 0
    nominal_queries: int | None = None

    @property
    def cost(self) -> int:
        """Budget units: component evaluations plus helper calls."""
        return self.queries + self.helper_calls

    @property
    def diff(self) -> float:
        return self.m_plus - self.m_minus


def _batch(obj: FiniteSumObjective, b: int, rng: np.random.Generator) -> np.ndarray:
    if b < 1:
        raise ValueError(f"batch size must be >= 1, got {b}")
    return rng.integers(0, obj.n, size=int(b))


def _pair_points(x_plus, x_minus):
    X = np.stack([np.asarray(x_plus, dtype=float), np.asarray(x_minus, dtype=float)])
    if X.ndim != 2:
        raise ValueError("trial points must be vectors")
    return X


def exact_pair(obj: FiniteSumObjective, x_plus, x_minus) -> EstimatePair:
    vals = obj.full_value(_pair_points(x_plus, x_minus))
    return EstimatePair(float(vals[0]), float(vals[1]), 2 * obj.n, Regime.EXACT,
                        nominal_queries=2 * obj.n)


def minibatch_pair(obj: FiniteSumObjective, x_plus, x_minus, b: int, rng: np.random.Generator,
                   full_enumeration: bool = False) -> EstimatePair:
    """Batch means of both trial points on one shared minibatch; ``2b`` queries.

    ``full_enumeration`` replaces sampling by the whole index set (exact values).
    """
    X = _pair_points(x_plus, x_minus)
    if full_enumeration:
        idx = np.arange(obj.n)
    else:
        idx = _batch(obj, b, rng)
    vals = obj.batch_mean(idx, X)
    q = 2 * len(idx)
    return EstimatePair(float(vals[0]), float(vals[1]), q, Regime.MINIBATCH, nominal_queries=q)


@dataclass
class VrState:
    """Epoch bookkeeping for the variance-reduced estimators; single owner."""

    m: int
    iter_in_epoch: int = 0
    snapshot_plus: np.ndarray | None = None
    snapshot_minus: np.ndarray | None = None
    snapshot_value_plus: float | None = None
    snapshot_value_minus: float | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"epoch length must be >= 1, got {self.m}")
        if not 0 <= self.iter_in_epoch < self.m:
            raise ValueError("iter_in_epoch must lie in [0, m)")

    @property
    def at_boundary(self) -> bool:
        return self.iter_in_epoch == 0

    def advance(self) -> None:
        self.iter_in_epoch = (self.iter_in_epoch + 1) % self.m


def vr_pair_symmetric(obj: FiniteSumObjective, x_plus, x_minus, b: int, state: VrState,
                      rng: np.random.Generator) -> EstimatePair:
    """Exact values at epoch boundaries, shared-minibatch means otherwise.

    No snapshot is stored: only ``M+ - M-`` drives the update, so the
    control-variate correction cancels.
    """
    if state.at_boundary:
        p = exact_pair(obj, x_plus, x_minus)
        out = EstimatePair(p.m_plus, p.m_minus, p.queries, Regime.VR_SYMMETRIC, nominal_queries=obj.n)
    else:
        p = minibatch_pair(obj, x_plus, x_minus, b, rng)
        out = EstimatePair(p.m_plus, p.m_minus, p.queries, Regime.VR_SYMMETRIC, nominal_queries=int(b))
    state.advance()
    return out


def vr_pair_two_snapshot(obj: FiniteSumObjective, x_plus, x_minus, b: int, state: VrState,
                         rng: np.random.Generator, full_enumeration: bool = False) -> EstimatePair:
    """Control-variate estimate around the last exactly evaluated pair.

    Mid-epoch cost is ``4b``: the shared batch is evaluated at both current
    points and both snapshot points. ``full_enumeration`` uses every
    component instead of a sampled batch, which makes the estimate exact.
    """
    X = _pair_points(x_plus, x_minus)
    if state.at_boundary:
        vals = obj.full_value(X)
        state.snapshot_plus, state.snapshot_minus = X[0].copy(), X[1].copy()
        state.snapshot_value_plus, state.snapshot_value_minus = float(vals[0]), float(vals[1])
        out = EstimatePair(float(vals[0]), float(vals[1]), 2 * obj.n, Regime.VR_SNAPSHOT,
                           nominal_queries=obj.n)
    else:
        if state.snapshot_plus is None or state.snapshot_value_plus is None:
            raise RuntimeError("two-snapshot estimator used before any snapshot was taken")
        idx = np.arange(obj.n) if full_enumeration else _batch(obj, b, rng)
        vals = obj.batch_mean(idx, np.stack([X[0], X[1], state.snapshot_plus, state.snapshot_minus]))
        m_plus = state.snapshot_value_plus + (vals[0] - vals[2])
        m_minus = state.snapshot_value_minus + (vals[1] - vals[3])
        out = EstimatePair(float(m_plus), float(m_minus), 4 * len(idx), Regime.VR_SNAPSHOT,
                           nominal_queries=len(idx))
    state.advance()
    return out


class HelperMode(str, enum.Enum):
    ADDITIVE_UNIFORM = "uniform"
    ADDITIVE_GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class HelperSpec:
    """Simulated delta-inexact helper ``h(x) = f(x) + noise`` (fresh noise per call).

    Uniform mode adds ``(delta/2) u`` with ``u ~ U[-1, 1]``, so the expected
    absolute error of a difference is ``delta/3``. Gaussian mode adds
    ``N(0, (delta sqrt(pi/8))^2)``, giving ``delta/sqrt(2)``.
    """

    delta: float
    mode: HelperMode = HelperMode.ADDITIVE_UNIFORM

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        object.__setattr__(self, "mode", HelperMode(self.mode))

    @property
    def max_perturbation(self) -> float:
        """Largest per-call deviation (uniform mode only; Gaussian is unbounded)."""
        if self.mode is HelperMode.ADDITIVE_UNIFORM:
            return self.delta / 2.0
        return math.inf

    def noise(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.mode is HelperMode.ADDITIVE_UNIFORM:
            return 0.5 * self.delta * rng.uniform(-1.0, 1.0, size)
        return self.delta * math.sqrt(math.pi / 8.0) * rng.standard_normal(size)


def helper_pair(obj: FiniteSumObjective, x_plus, x_minus, spec: HelperSpec,
                rng: np.random.Generator) -> EstimatePair:
    """Two helper calls; charged as helper calls, not component queries."""
    vals = obj.full_value(_pair_points(x_plus, x_minus)) + spec.noise(rng, 2)
    return EstimatePair(float(vals[0]), float(vals[1]), 0, Regime.HELPER, helper_calls=2,
                        nominal_queries=0)


def translation_gap(pair, f_plus: float, f_minus: float) -> float:
    """Best common-shift residual ``0.5 |(M+ - M-) - (f+ - f-)|``.

    ``pair`` is an :class:`EstimatePair` or an ``(m_plus, m_minus)`` tuple.
    Shifting both estimates by one constant leaves this unchanged.
    """
    m_plus, m_minus = (pair.m_plus, pair.m_minus) if isinstance(pair, EstimatePair) else pair
    return 0.5 * abs((m_plus - m_minus) - (f_plus - f_minus))


def shift_residual_grid(m_plus, m_minus, f_plus, f_minus, lo: float = -10.0, hi: float = 10.0,
                        step: float = 1e-4):
    """Brute force ``min_c |M+ - c - f+| + |M- - c - f-|`` over a grid of ``c``.

    Accepts scalars or equal-length arrays (one minimum per entry).
    """
    grid = np.arange(lo, hi + 0.5 * step, step)
    a = np.atleast_1d(np.asarray(m_plus, dtype=float) - np.asarray(f_plus, dtype=float))
    bm = np.atleast_1d(np.asarray(m_minus, dtype=float) - np.asarray(f_minus, dtype=float))
    out = np.empty(a.shape)
    rows = max(1, 4_000_000 // grid.size)
    for s in range(0, a.size, rows):
        aa, bb = a[s:s + rows, None], bm[s:s + rows, None]
        out[s:s + rows] = (np.abs(aa - grid) + np.abs(bb - grid)).min(axis=1)
    return float(out[0]) if np.ndim(m_plus) == 0 else out


class Estimator:
    """Callable producing an :class:`EstimatePair`; stateful ones own their state."""

    regime: Regime

    def __call__(self, obj: FiniteSumObjective, x_plus, x_minus, rng: np.random.Generator) -> EstimatePair:
        raise NotImplementedError

    def reset(self) -> None:
        pass


class ExactEstimator(Estimator):
    regime = Regime.EXACT

    def __call__(self, obj, x_plus, x_minus, rng):
        return exact_pair(obj, x_plus, x_minus)


@dataclass
class MinibatchEstimator(Estimator):
    b: int
    regime = Regime.MINIBATCH

    def __call__(self, obj, x_plus, x_minus, rng):
        return minibatch_pair(obj, x_plus, x_minus, self.b, rng)


@dataclass
class VrSymmetricEstimator(Estimator):
    b: int
    m: int
    state: VrState = field(init=False)
    regime = Regime.VR_SYMMETRIC

    def __post_init__(self):
        self.state = VrState(self.m)

    def __call__(self, obj, x_plus, x_minus, rng):
        return vr_pair_symmetric(obj, x_plus, x_minus, self.b, self.state, rng)

    def reset(self):
        self.state = VrState(self.m)


@dataclass
class VrTwoSnapshotEstimator(VrSymmetricEstimator):
    regime = Regime.VR_SNAPSHOT

    def __call__(self, obj, x_plus, x_minus, rng):
        return vr_pair_two_snapshot(obj, x_plus, x_minus, self.b, self.state, rng)


@dataclass
class HelperEstimator(Estimator):
    spec: HelperSpec
    regime = Regime.HELPER

    def __call__(self, obj, x_plus, x_minus, rng):
        return helper_pair(obj, x_plus, x_minus, self.spec, rng)


def make_estimator(name: str, b: int = 1, m: int = 1, delta: float = 0.0,
                   helper_mode: str = "uniform") -> Estimator:
    """Build an estimator from its config string."""
    regime = Regime(name)
    if regime is Regime.EXACT:
        return ExactEstimator()
    if regime is Regime.MINIBATCH:
        return MinibatchEstimator(b)
    if regime is Regime.VR_SYMMETRIC:
        return VrSymmetricEstimator(b, m)
    if regime is Regime.VR_SNAPSHOT:
        return VrTwoSnapshotEstimator(b, m)
    return HelperEstimator(HelperSpec(delta, HelperMode(helper_mode)))
