"""Executable checks of the descent, variance and accuracy-floor properties.

Every check is deterministic given its generator and returns
:class:`CheckReport` rows. Bound checks allow ``se_slack`` Monte Carlo
standard errors; slope checks fit ordinary least squares on log-log grids.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .directions import DirectionDistribution, DirectionKind, estimate_mu, fallback_mu
from .estimators import ExactEstimator, HelperEstimator, HelperSpec, VrState, vr_pair_symmetric, vr_pair_two_snapshot
from .objectives import FiniteSumObjective, TheoryConstants
from .search import plan_parameters, run, sign

__all__ = [
    "CheckReport",
    "Tolerances",
    "TOLERANCES",
    "loglog_slope",
    "enumerate_batch_variance",
    "check_descent_lemma",
    "check_minibatch_error",
    "check_variance_lemma",
    "check_case2_projection",
    "measure_vr_error",
    "check_vr_error_scaling",
    "check_helper_floor",
    "run_all_checks",
    "write_report",
]


@dataclass(frozen=True)
class Tolerances:
    se_slack: float = 3.0
    variance_slope: tuple[float, float] = (-1.0, 0.05)
    case2_slope: tuple[float, float] = (-0.5, 0.1)
    vr_slope_m: tuple[float, float] = (1.0, 0.15)
    vr_slope_b: tuple[float, float] = (-0.5, 0.1)
    vr_slope_eta: tuple[float, float] = (1.0, 0.15)
    vr_bound_fraction: float = 0.95
    helper_slope: tuple[float, float] = (0.5, 0.15)
    # last decile must not sit more than this far below the one before it
    helper_plateau: float = 0.1


TOLERANCES = Tolerances()


@dataclass
class CheckReport:
    name: str
    measured: float
    target: float
    passed: bool
    samples: int
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: measured={self.measured:.6g} target={self.target:.6g} ({self.detail})"


def loglog_slope(x, y) -> float:
    """OLS slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def _slope_report(name, x, y, target, samples, extra="") -> CheckReport:
    center, tol = target
    s = loglog_slope(x, y)
    return CheckReport(name, s, center, abs(s - center) <= tol, samples,
                       f"tolerance +-{tol}; values {np.round(np.asarray(y, float), 8).tolist()}{extra}")


def check_descent_lemma(obj: FiniteSumObjective, dist: DirectionDistribution, eta: float, x, reps: int,
                        rng: np.random.Generator, constants: TheoryConstants | None = None,
                        mu_D: float | None = None, L0: float | None = None, L1: float | None = None,
                        tol: Tolerances = TOLERANCES) -> CheckReport:
    """One exact-value step from ``x``: ``E f(x1) <= f(x) - (mu/2) eta |grad| + (L0/2) eta^2``.

    Refuses (``ValueError``) when ``eta > mu_D / L1``.
    """
    x = np.asarray(x, dtype=float)
    if constants is not None:
        L0 = constants.L0 if L0 is None else L0
        L1 = constants.L1 if L1 is None else L1
        mu_D = constants.mu_D if mu_D is None else mu_D
    if L0 is None or L1 is None:
        raise ValueError("smoothness constants required")
    grad = obj.full_gradient(x)
    gnorm = float(np.linalg.norm(grad))
    if mu_D is None:
        mu_D = estimate_mu(dist, grad, 100_000, rng) if gnorm > 0 else fallback_mu(dist.dim)
    if L1 > 0 and eta > mu_D / L1:
        raise ValueError(f"eta={eta} exceeds the descent cap mu_D/L1={mu_D / L1}")
    S = dist.draw(rng, reps)
    f0 = float(obj.full_value(x))
    fp = obj.full_value(x + eta * S)
    fm = obj.full_value(x - eta * S)
    # tie rule sign(0)=+1 moves to x-, so x+ wins only on a strict improvement
    f1 = np.where(fp < fm, fp, fm)
    change = f1 - f0
    mean = float(change.mean())
    se = float(change.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    bound = -(mu_D / 2.0) * eta * gnorm + (L0 / 2.0) * eta ** 2
    slack = tol.se_slack * se + 1e-12 * max(1.0, abs(f0))
    return CheckReport("descent_lemma", mean, bound, mean <= bound + slack, reps,
                       f"eta={eta:g} |grad|={gnorm:.4g} mu_D={mu_D:.4g} se={se:.3g}")


def check_minibatch_error(obj: FiniteSumObjective, x, b: int, reps: int, sigma0: float,
                          rng: np.random.Generator, strict: bool = True) -> CheckReport:
    """``E|M - f(x)| <= sigma0 / sqrt(b)`` for a batch mean of size ``b``.

    With an estimated ``sigma0`` (a lower bound) the report is advisory:
    ``passed`` is always true and the comparison is left in ``detail``.
    """
    vals = obj.component_values(np.arange(obj.n), x)
    f = float(vals.mean())
    idx = rng.integers(0, obj.n, size=(reps, b))
    err = np.abs(vals[idx].mean(axis=1) - f)
    mean = float(err.mean())
    bound = sigma0 / math.sqrt(b) * (1.0 + 3.0 / math.sqrt(reps))
    ok = mean <= bound
    return CheckReport("minibatch_value_error", mean, bound, ok if strict else True, reps,
                       "strict" if strict else f"advisory (holds={ok})")


def enumerate_batch_variance(values, b: int) -> float:
    """Exact variance of the mean of ``b`` draws with replacement, by enumerating all ``n^b`` batches."""
    values = np.asarray(values, dtype=float)
    means = np.array([np.mean(c) for c in itertools.product(values, repeat=b)])
    return float(np.mean(np.square(means - means.mean())))


def check_variance_lemma(obj: FiniteSumObjective, x, b_grid, reps: int, rng: np.random.Generator,
                         tol: Tolerances = TOLERANCES) -> list[CheckReport]:
    """Variance of a minibatch mean decays like ``1/b``.

    Always fits the log-log slope over ``b_grid``; for ``n <= 6`` also
    compares exhaustive enumeration against ``Var(single)/b`` for ``b <= 2``.
    """
    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    vals = obj.component_values(np.arange(obj.n), x)
    reports = []
    single = float(np.var(vals))
    if single <= 1e-300:
        reports.append(CheckReport("variance_slope", float("nan"), tol.variance_slope[0], True, 0,
                                   "constant components; slope undefined"))
    else:
        variances = []
        for b in b_grid:
            idx = rng.integers(0, obj.n, size=(reps, int(b)))
            variances.append(float(vals[idx].mean(axis=1).var(ddof=1)))
        reports.append(_slope_report("variance_slope", b_grid, variances, tol.variance_slope,
                                     reps * len(b_grid)))
    if obj.n <= 6:
        worst = 0.0
        for b in (1, 2):
            exact = enumerate_batch_variance(vals, b)
            worst = max(worst, abs(exact - single / b))
        reports.append(CheckReport("variance_enumeration", worst, 0.0, worst <= 1e-12 * max(1.0, single),
                                   obj.n ** 2, "max |Var_enum - Var/b| over b in {1,2}"))
    return reports


def _projection_error(obj, x, b, reps, dist, rng):
    Z = obj.component_gradients(np.arange(obj.n), x)
    Z = Z - Z.mean(axis=0)
    out = 0.0
    done = 0
    chunk = max(1, 2_000_000 // (int(b) * obj.dim))
    while done < reps:
        k = min(chunk, reps - done)
        idx = rng.integers(0, obj.n, size=(k, int(b)))
        zbar = Z[idx].mean(axis=1)
        S = dist.draw(rng, k)
        out += float(np.abs(np.einsum("kd,kd->k", zbar, S)).sum())
        done += k
    return out / reps


def check_case2_projection(family, b_grid, d_grid, reps: int, rng: np.random.Generator,
                           kind: str = "sphere", tol: Tolerances = TOLERANCES) -> list[CheckReport]:
    """``E|<batch gradient noise, s>|`` scales as ``1/sqrt(d b)``.

    ``family(d)`` returns ``(objective, x)``; pass ``d_grid=None`` to fit
    the ``b`` slope only, on ``family(None)``.
    """
    reports = []
    if d_grid is None:
        obj, x = family(None)
        dist = DirectionDistribution(DirectionKind(kind), obj.dim)
        errs = [_projection_error(obj, x, b, reps, dist, rng) for b in b_grid]
        reports.append(_slope_report("case2_projection_slope_b", b_grid, errs, tol.case2_slope,
                                     reps * len(b_grid)))
        return reports
    rows = []
    for d in d_grid:
        obj, x = family(d)
        dist = DirectionDistribution(DirectionKind(kind), obj.dim)
        for b in b_grid:
            rows.append((b, d, _projection_error(obj, x, b, reps, dist, rng)))
    arr = np.array(rows, dtype=float)
    design = np.column_stack([np.ones(len(arr)), np.log(arr[:, 0]), np.log(arr[:, 1])])
    coef, *_ = np.linalg.lstsq(design, np.log(arr[:, 2]), rcond=None)
    center, t = tol.case2_slope
    n = reps * len(rows)
    reports.append(CheckReport("case2_projection_slope_b", float(coef[1]), center, abs(coef[1] - center) <= t, n,
                               f"joint fit over b and d, tolerance +-{t}"))
    reports.append(CheckReport("case2_projection_slope_d", float(coef[2]), center, abs(coef[2] - center) <= t, n,
                               f"joint fit over b and d, tolerance +-{t}"))
    return reports


def measure_vr_error(obj: FiniteSumObjective, dist: DirectionDistribution, x0, eta: float, m: int, b: int,
                     reps: int, rng: np.random.Generator, form: str = "sym") -> float:
    """Mean ``|(M+ - M-) - (f(x+) - f(x-))|`` at the last iteration of an epoch.

    Each repetition starts a fresh epoch at ``x0`` (exact evaluation),
    follows the estimator's own sign decisions for ``m - 1`` steps and
    records the error at iteration ``m - 1``, the furthest from the full
    pass. ``m = 1`` has no mid-epoch iteration and returns 0.
    """
    if m == 1:
        return 0.0
    pair_fn = vr_pair_symmetric if form == "sym" else vr_pair_two_snapshot
    x0 = np.asarray(x0, dtype=float)
    total = 0.0
    for _ in range(reps):
        state = VrState(m)
        x = x0
        for k in range(m):
            s = dist.draw(rng)
            xp, xm = x + eta * s, x - eta * s
            pair = pair_fn(obj, xp, xm, b, state, rng)
            if k == m - 1:
                fp, fm = obj.full_value(np.stack([xp, xm]))
                total += abs(pair.diff - (fp - fm))
            x = x - sign(pair.diff) * eta * s
    return total / reps


def _max_component_gradient(obj, points) -> float:
    idx = np.arange(obj.n)
    return max(float(np.linalg.norm(obj.component_gradients(idx, p), axis=1).max()) for p in points)


def check_vr_error_scaling(obj: FiniteSumObjective, dist: DirectionDistribution, eta: float, m_grid, b_grid,
                           reps: int, rng: np.random.Generator, x0=None, eta_factors=(1, 2, 4, 8),
                           m_ref: int | None = None, b_ref: int | None = None, G: float | None = None,
                           form: str = "sym", tol: Tolerances = TOLERANCES) -> list[CheckReport]:
    """Mid-epoch error of the variance-reduced difference against ``O(eta m G / sqrt(b))``.

    Fits the slope in ``m`` (at ``b_ref``), in ``b`` (at ``m_ref``) and in
    ``eta`` (at both), and counts the grid cells obeying ``4 eta G m / sqrt(b)``.
    """
    x0 = np.zeros(obj.dim) if x0 is None else np.asarray(x0, dtype=float)
    m_grid, b_grid = [int(v) for v in m_grid], [int(v) for v in b_grid]
    m_ref = m_grid[len(m_grid) // 2] if m_ref is None else m_ref
    b_ref = b_grid[len(b_grid) // 2] if b_ref is None else b_ref
    cells = {}
    for m in m_grid:
        for b in b_grid:
            cells[m, b] = measure_vr_error(obj, dist, x0, eta, m, b, reps, rng, form)
    if G is None:
        G = _max_component_gradient(obj, [x0] + [x0 + eta * max(m_grid) * dist.draw(rng) for _ in range(8)])
    by_m = [cells[m, b_ref] if (m, b_ref) in cells else measure_vr_error(obj, dist, x0, eta, m, b_ref, reps, rng, form)
            for m in m_grid]
    by_b = [cells[m_ref, b] if (m_ref, b) in cells else measure_vr_error(obj, dist, x0, eta, m_ref, b, reps, rng, form)
            for b in b_grid]
    etas = [eta * f for f in eta_factors]
    by_eta = [measure_vr_error(obj, dist, x0, e, m_ref, b_ref, reps, rng, form) for e in etas]
    n_cells = len(cells)
    ok = sum(cells[m, b] <= 4 * eta * G * m / math.sqrt(b) for (m, b) in cells)
    tag = f"; form={form}"
    return [
        _slope_report("vr_error_slope_m", m_grid, by_m, tol.vr_slope_m, reps * len(m_grid), tag),
        _slope_report("vr_error_slope_b", b_grid, by_b, tol.vr_slope_b, reps * len(b_grid), tag),
        _slope_report("vr_error_slope_eta", etas, by_eta, tol.vr_slope_eta, reps * len(etas), tag),
        CheckReport("vr_error_bound_fraction", ok / n_cells, tol.vr_bound_fraction,
                    ok / n_cells >= tol.vr_bound_fraction, reps * n_cells, f"G={G:.4g}{tag}"),
    ]


@dataclass
class FloorResult:
    delta: float
    eta: float
    floor: float
    inconclusive: bool
    per_trial: list[float] = field(default_factory=list)


def _floor_of(trace, plateau: float) -> tuple[float, bool]:
    g = np.array([r.grad_norm for r in trace[1:]])
    k = max(1, len(g) // 10)
    last, prev = g[-k:].mean(), g[-2 * k:-k].mean()
    return float(last), bool(last < (1 - plateau) * prev)


def check_helper_floor(obj: FiniteSumObjective, dist: DirectionDistribution, deltas, constants: TheoryConstants,
                       T: int, trials: int, x0, seed: int = 0, epsilon: float = 1.0,
                       tol: Tolerances = TOLERANCES) -> tuple[list[CheckReport], list[FloorResult]]:
    """Accuracy floor of helper-driven search against ``sqrt(delta)``.

    For each ``delta`` the helper planner picks the step size with budget
    ``T``; the floor is the mean ``|grad f|`` over the last tenth of the run,
    averaged over trials. A ``delta = 0`` entry is also compared bit for bit
    with the exact-value optimizer.
    """
    results = []
    reports = []
    for delta in deltas:
        plan = plan_parameters("helper", constants, epsilon, obj.n, obj.dim, delta=delta, T=T)
        floors, flags = [], []
        for k in range(trials):
            trace = run(x0, plan, dist, HelperEstimator(HelperSpec(delta)), obj, _trial_seed(seed, k),
                        track_grad=True)
            f, inc = _floor_of(trace, tol.helper_plateau)
            floors.append(f)
            flags.append(inc)
            if delta == 0 and k == 0:
                exact = run(x0, plan, dist, ExactEstimator(), obj, _trial_seed(seed, k), track_grad=True)
                same = all(a.f_true == e.f_true and a.step_sign == e.step_sign for a, e in zip(trace, exact))
                same = same and len(trace) == len(exact)
                reports.append(CheckReport("helper_delta0_matches_exact", float(same), 1.0, same, len(trace),
                                           "bit-identical trajectory"))
        results.append(FloorResult(float(delta), plan.eta, float(np.mean(floors)), any(flags), floors))
    pos = [r for r in results if r.delta > 0]
    if len(pos) >= 2:
        inconclusive = any(r.inconclusive for r in pos)
        rep = _slope_report("helper_floor_slope", [r.delta for r in pos], [r.floor for r in pos],
                            tol.helper_slope, trials * len(pos) * T,
                            "; INCONCLUSIVE: still decreasing" if inconclusive else "")
        if inconclusive:
            rep.passed = False
        reports.append(rep)
    return reports, results


def _trial_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(k,)).generate_state(1)[0])


def write_report(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "measured", "target", "passed", "samples"])
        for r in reports:
            w.writerow([r.name, repr(float(r.measured)), repr(float(r.target)), int(bool(r.passed)), r.samples])


def run_all_checks(seed: int = 0, full: bool = False) -> list[CheckReport]:
    """The lemma checks on the standard test objectives, sized for a quick run.

    ``full`` adds the variance-reduction grid and the helper floor, which
    take minutes rather than seconds.
    """
    from .datasets import synthetic_classification
    from .objectives import make_logistic, make_quadratic
    from .rng import stream

    rng = stream(seed, 0, "diagnostic")
    X, y = synthetic_classification(seed=seed)
    logistic = make_logistic(X, y, 1.0)
    d = 10
    quad = make_quadratic(np.ones(d), 0.5, 64, stream(seed, 0, "data"))
    sphere = DirectionDistribution(DirectionKind.UNIT_SPHERE, d)
    reports = []
    for k in range(3):
        x = rng.standard_normal(d)
        reports.append(check_descent_lemma(quad, sphere, 0.01, x, 10_000, rng, L0=1.0, L1=0.0))
        reports[-1].name = f"descent_lemma_{k}"
    xl = 0.1 * rng.standard_normal(logistic.dim)
    reports.extend(check_variance_lemma(logistic, xl, [1, 4, 16, 64], 4000, rng))
    reports.append(check_minibatch_error(quad, np.full(d, 1 / math.sqrt(d)), 16, 4000, 0.5, rng))
    reports.extend(check_case2_projection(lambda _: (logistic, xl), [1, 4, 16, 64], None, 4000, rng))
    if full:
        sphere_l = DirectionDistribution(DirectionKind.UNIT_SPHERE, logistic.dim)
        reports.extend(check_vr_error_scaling(logistic, sphere_l, 0.01, [2, 4, 8, 16], [4, 16, 64, 256], 200,
                                              rng, x0=xl, m_ref=8, b_ref=16))
        quad30 = make_quadratic(np.ones(30), 0.5, 64, stream(seed, 0, "data"))
        x0 = np.full(30, 3 / math.sqrt(30))
        c = TheoryConstants(L0=1.0, L1=0.0, G=0.0, sigma0=0.5, sigma1=0.0,
                            F0=float(quad30.full_value(x0)), mu_D=fallback_mu(30))
        rep, _ = check_helper_floor(quad30, DirectionDistribution(DirectionKind.UNIT_SPHERE, 30),
                                    [0.0, 1e-4, 1e-3, 1e-2, 1e-1], c, 20_000, 2, x0, seed)
        reports.extend(rep)
    return reports
