"""Momentum on function differences, kept to demonstrate that it does not help.

Three recursions replace the fresh minibatch difference
``D_t = f_xi(x_t+) - f_xi(x_t-)`` by a running estimate ``M_t``:

* heavy ball: ``M_t = (1-beta) M_{t-1} + beta D_t``
* MVR, as printed: ``M_t = (1-beta)(M_{t-1} + D_t + D'_{t-1}) + beta D_t`` where
  ``D'_{t-1}`` is the previous pair evaluated on the current batch. The
  conventional first-order form subtracts ``D'_{t-1}``; pass
  ``corrected_sign=True`` for that.
* transport: ``M_t = (1-beta) M_{t-1} + beta D~_t`` with ``D~_t`` taken at the
  extrapolated points ``x_t+- + (1-beta)/beta (x_t+- - x_{t-1}+-)``.

``beta = 1`` reduces every variant to the plain estimator.
"""

from __future__ import annotations

import csv
import enum
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .directions import DirectionDistribution
from .objectives import FiniteSumObjective
from .rng import make_streams
from .search import NumericalAbort, Plan, RunRecord, sign

__all__ = [
    "MomentumVariant",
    "MomentumState",
    "ErrorDecomposition",
    "momentum_difference",
    "decompose_error",
    "run_momentum",
    "beta_sweep",
    "transport_variance_ratio",
    "write_sweep_csv",
]


class MomentumVariant(str, enum.Enum):
    HEAVY_BALL = "heavyball"
    MVR = "mvr"
    TRANSPORT = "transport"


@dataclass
class MomentumState:
    beta: float
    variant: MomentumVariant = MomentumVariant.HEAVY_BALL
    M: float | None = None
    prev_plus: np.ndarray | None = None
    prev_minus: np.ndarray | None = None
    corrected_sign: bool = False

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        self.variant = MomentumVariant(self.variant)

    @property
    def extrapolation(self) -> float:
        return (1.0 - self.beta) / self.beta


@dataclass(frozen=True)
class ErrorDecomposition:
    e: float
    drift: float
    noise: float

    def residual(self, beta: float, prev_e: float) -> float:
        """Deviation from ``e_t = (1-beta)(e_{t-1} + drift_t) + beta noise_t``."""
        return abs(self.e - ((1.0 - beta) * (prev_e + self.drift) + beta * self.noise))


def momentum_difference(state: MomentumState, fresh_diff: float, extrapolated_diff: float | None = None,
                        stale_diff: float | None = None) -> float:
    """Advance the recursion and return ``M_t``.

    The first call initializes ``M`` to the observed difference. Transport
    without a previous point (first step) falls back to heavy ball on
    ``fresh_diff``; MVR without ``stale_diff`` (first step) likewise.
    """
    beta = state.beta
    if state.M is None:
        state.M = float(extrapolated_diff if extrapolated_diff is not None else fresh_diff)
        return state.M
    if state.variant is MomentumVariant.TRANSPORT and extrapolated_diff is not None:
        m = (1.0 - beta) * state.M + beta * extrapolated_diff
    elif state.variant is MomentumVariant.MVR and stale_diff is not None:
        corr = -stale_diff if state.corrected_sign else stale_diff
        m = (1.0 - beta) * (state.M + fresh_diff + corr) + beta * fresh_diff
    else:
        m = (1.0 - beta) * state.M + beta * fresh_diff
    if not math.isfinite(m):
        raise NumericalAbort("momentum buffer became non-finite")
    state.M = float(m)
    return state.M


def decompose_error(m_t: float, f_plus: float, f_minus: float, true_prev_diff: float | None,
                    sample_diff: float) -> ErrorDecomposition:
    """Split the heavy-ball error ``e_t = M_t - (f(x_t+) - f(x_t-))``.

    ``drift = D_{t-1} - D_t`` (true differences) and ``noise = sample_diff - D_t``.
    With this orientation of the drift term the recursion
    ``e_t = (1-beta)(e_{t-1} + drift) + beta noise`` is an algebraic identity.
    """
    true_diff = f_plus - f_minus
    drift = 0.0 if true_prev_diff is None else true_prev_diff - true_diff
    return ErrorDecomposition(m_t - true_diff, drift, sample_diff - true_diff)


@dataclass
class MomentumTrace:
    records: list[RunRecord] = field(default_factory=list)
    decompositions: list[ErrorDecomposition] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    fresh_diffs: list[float] = field(default_factory=list)
    used_diffs: list[float] = field(default_factory=list)


def run_momentum(x0, plan: Plan, dist: DirectionDistribution, obj: FiniteSumObjective, beta: float,
                 variant="heavyball", seed: int = 0, trial: int = 0, max_iters: int | None = None,
                 instrument: bool = False, corrected_sign: bool = False,
                 max_queries: int | None = None) -> MomentumTrace:
    """Random search driven by ``sign(M_t)`` instead of the fresh difference.

    Direction and batch streams are the ones the plain optimizer uses, so
    ``beta = 1`` reproduces the plain trajectory bit for bit. Costs per step:
    ``2b`` (heavy ball, transport) and ``4b`` for MVR with ``beta < 1``.
    With ``max_queries`` the run also stops once that many evaluations are spent.
    """
    streams = make_streams(seed, trial)
    state = MomentumState(beta, MomentumVariant(variant), corrected_sign=corrected_sign)
    b = plan.b
    x = np.array(x0, dtype=float)
    out = MomentumTrace()
    q = 0
    out.records.append(RunRecord(0, 0, float(obj.full_value(x))))
    prev_e = 0.0
    prev_true = None
    T = plan.T if max_iters is None else max_iters
    if max_iters is None and max_queries is not None:
        T = sys.maxsize
    for t in range(T):
        if max_queries is not None and q >= max_queries:
            break
        s = dist.draw(streams.direction)
        step = plan.eta * s
        xp, xm = x + step, x - step
        idx = streams.sample.integers(0, obj.n, size=b)
        fp, fm = obj.batch_mean(idx, np.stack([xp, xm]))
        fresh = fp - fm
        q += 2 * b
        extrap = stale = None
        if state.prev_plus is not None and beta < 1.0:
            if state.variant is MomentumVariant.TRANSPORT:
                k = state.extrapolation
                tp = xp + k * (xp - state.prev_plus)
                tm = xm + k * (xm - state.prev_minus)
                ep, em = obj.batch_mean(idx, np.stack([tp, tm]))
                extrap = ep - em
                # the fresh pair is not needed by transport; charge the extrapolated pair instead
            elif state.variant is MomentumVariant.MVR:
                sp, sm = obj.batch_mean(idx, np.stack([state.prev_plus, state.prev_minus]))
                stale = sp - sm
                q += 2 * b
        m_t = momentum_difference(state, fresh, extrap, stale)
        if instrument:
            tp_, tm_ = obj.full_value(np.stack([xp, xm]))
            dec = decompose_error(m_t, tp_, tm_, prev_true, fresh)
            if t > 0:
                out.residuals.append(dec.residual(beta, prev_e))
            out.decompositions.append(dec)
            prev_e, prev_true = dec.e, tp_ - tm_
        out.fresh_diffs.append(fresh)
        out.used_diffs.append(fresh if extrap is None else extrap)
        state.prev_plus, state.prev_minus = xp, xm
        sg = sign(m_t)
        x = x - sg * step
        out.records.append(RunRecord(t + 1, q, float(obj.full_value(x)), None, sg))
    return out


def beta_sweep(obj: FiniteSumObjective, dist: DirectionDistribution, plan: Plan, betas, trials: int,
               seed: int = 0, x0=None, variant="heavyball") -> list[tuple[float, float, float]]:
    """Mean and sample s.d. of the final ``f`` per ``beta`` (same iterations for all)."""
    x0 = np.zeros(obj.dim) if x0 is None else x0
    rows = []
    for beta in betas:
        finals = [run_momentum(x0, plan, dist, obj, beta, variant, seed, k).records[-1].f_true
                  for k in range(trials)]
        sd = float(np.std(finals, ddof=1)) if trials > 1 else 0.0
        rows.append((float(beta), float(np.mean(finals)), sd))
    return rows


def transport_variance_ratio(obj: FiniteSumObjective, dist: DirectionDistribution, x, eta: float,
                             beta: float, b: int, reps: int, rng: np.random.Generator):
    """``Var(extrapolated difference) / Var(plain difference)`` at a fixed iterate.

    Consecutive trial pairs come from two independent directions of step
    ``eta``; returns ``(ratio, standard error)`` by the delta method.
    """
    x = np.asarray(x, dtype=float)
    k = (1.0 - beta) / beta
    plain = np.empty(reps)
    extra = np.empty(reps)
    for r in range(reps):
        s_prev, s = dist.draw(rng), dist.draw(rng)
        xp, xm = x + eta * s, x - eta * s
        pp, pm = x + eta * s_prev, x - eta * s_prev
        idx = rng.integers(0, obj.n, size=b)
        v = obj.batch_mean(idx, np.stack([xp, xm, xp + k * (xp - pp), xm + k * (xm - pm)]))
        plain[r] = v[0] - v[1]
        extra[r] = v[2] - v[3]
    vp, ve = plain.var(ddof=1), extra.var(ddof=1)
    ratio = ve / vp
    # relative s.e. of a sample variance ~ sqrt(2/(reps-1)) (Gaussian approximation)
    rel = math.sqrt(2.0 / (reps - 1))
    return float(ratio), float(ratio * rel * math.sqrt(2.0))


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "mean_final_f", "sd_final_f"])
        for beta, mean, sd in rows:
            w.writerow([repr(beta), repr(mean), repr(sd)])
