"""Experiment runner: pilot step-size tuning, budgeted multi-trial runs, aggregation, CSV output.

All files are written with ``repr`` floats so equal seeds and configs give
byte-identical output. Trials may run in worker processes (``jobs > 1``);
results are collected in trial order, so output does not depend on ``jobs``.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import default_mu_fd, rsgf_cost, rsgf_gradient, zocd_cost, zocd_gradient
from .datasets import DataError, load_dataset
from .directions import DirectionDistribution, DirectionKind
from .estimators import HelperEstimator, HelperSpec, MinibatchEstimator, VrSymmetricEstimator
from .momentum_lab import beta_sweep, run_momentum, write_sweep_csv
from .objectives import FiniteSumObjective, make_logistic, make_quadratic
from .rng import make_streams, stream
from .search import NumericalAbort, Plan, run

log = logging.getLogger(__name__)

METHODS = ("mi2p", "vr_mi2p", "rsgf", "zocd", "helper",
           "momentum_heavyball", "momentum_mvr", "momentum_transport")
DEFAULT_PILOT_GRID = tuple(float(v) for v in np.geomspace(1e-3, 1.0, 7))


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 1)."""


@dataclass
class ExperimentConfig:
    method: str = "mi2p"
    b: int = 1
    # total budget in component queries (helper calls for the helper method)
    budget: int = 200_000
    # if set, overrides budget with budget_iters * 2b: the same budget for every method at one b
    budget_iters: int | None = None
    trials: int = 20
    seed: int = 0
    dataset: str = "synthetic"
    standardize: bool = True
    lam: float = 1.0
    direction: str = "sphere"
    eta: float | str = "pilot"
    mu_fd: float | None = None
    m: int = 10
    delta: float = 0.0
    helper_mode: str = "uniform"
    beta: float = 1.0
    noise_sigma: float = 0.5
    pilot_grid: tuple[float, ...] = DEFAULT_PILOT_GRID
    pilot_fraction: float = 0.1
    checkpoints: int = 100
    jobs: int = 1
    out: str = "results"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.b < 1:
            raise ConfigError("b must be >= 1")
        if self.budget_iters is not None and self.budget_iters < 1:
            raise ConfigError("budget_iters must be >= 1")
        if not self.budget > 0:
            raise ConfigError("budget must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.eta != "pilot":
            try:
                self.eta = float(self.eta)
            except (TypeError, ValueError):
                raise ConfigError(f"eta must be a number or 'pilot', got {self.eta!r}") from None
            if not (self.eta > 0 and math.isfinite(self.eta)):
                raise ConfigError("eta must be positive")
        if not self.pilot_grid:
            raise ConfigError("pilot grid is empty")
        if not 0 < self.pilot_fraction <= 1:
            raise ConfigError("pilot_fraction must lie in (0, 1]")
        if self.checkpoints < 1:
            raise ConfigError("checkpoints must be >= 1")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        if not 0 < self.beta <= 1:
            raise ConfigError("beta must lie in (0, 1]")
        if self.mu_fd is not None and not self.mu_fd > 0:
            raise ConfigError("mu_fd must be positive")
        try:
            DirectionKind(self.direction)
        except ValueError:
            raise ConfigError(f"unknown direction kind {self.direction!r}") from None

    @property
    def total_budget(self) -> int:
        return int(self.budget_iters * 2 * self.b) if self.budget_iters is not None else int(self.budget)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


# ---- config files ------------------------------------------------------------

def _to_bool(s: str) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _optional(conv):
    def f(s):
        return None if str(s).strip().lower() in ("", "none") else conv(s)
    return f


def _float_list(s) -> tuple[float, ...]:
    if isinstance(s, (tuple, list)):
        return tuple(float(v) for v in s)
    return tuple(float(v) for v in str(s).split(",") if v.strip())


def _eta(s):
    return "pilot" if str(s).strip() == "pilot" else float(s)


CONVERTERS = {
    "method": str, "b": int, "budget": int, "budget_iters": _optional(int), "trials": int, "seed": int,
    "dataset": str, "standardize": _to_bool, "lam": float, "direction": str, "eta": _eta,
    "mu_fd": _optional(float), "m": int, "delta": float, "helper_mode": str, "beta": float,
    "noise_sigma": float, "pilot_grid": _float_list, "pilot_fraction": float, "checkpoints": int,
    "jobs": int, "out": str,
}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; keys may use dashes."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONVERTERS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            out[key] = CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from None
    return out


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file, then ``overrides`` (entries set to ``None`` are ignored)."""
    values = {}
    if path is not None:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---- objectives --------------------------------------------------------------

def build_objective(cfg: ExperimentConfig) -> tuple[FiniteSumObjective, np.ndarray]:
    """Objective and starting point for ``cfg.dataset``.

    Logistic datasets start at the origin. ``"quadratic"`` is the identity
    quadratic in d=30 with n=455 components and value noise ``noise_sigma``,
    started at distance 3 from its minimizer along the diagonal.
    """
    if cfg.dataset == "quadratic":
        d = 30
        obj = make_quadratic(np.ones(d), cfg.noise_sigma, 455, stream(cfg.seed, 0, "data"))
        return obj, np.full(d, 3.0 / math.sqrt(d))
    X, y = load_dataset(cfg.dataset, seed=cfg.seed, standardize_features=cfg.standardize)
    try:
        obj = make_logistic(X, y, cfg.lam)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return obj, np.zeros(obj.dim)


# ---- single trajectories -----------------------------------------------------

def _baseline_trajectory(cfg, obj, x0, eta, streams, budget):
    mu_fd = cfg.mu_fd if cfg.mu_fd is not None else default_mu_fd(obj.dim)
    sphere = DirectionDistribution(DirectionKind.UNIT_SPHERE, obj.dim)
    x = np.array(x0, dtype=float)
    cost = rsgf_cost(cfg.b) if cfg.method == "rsgf" else zocd_cost(cfg.b, obj.dim)
    qs, fs = [0], [float(obj.full_value(x))]
    q = 0
    while q < budget:
        if cfg.method == "rsgf":
            u = sphere.draw(streams.direction)
            g = rsgf_gradient(x, obj, cfg.b, mu_fd, streams.sample, u=u)
        else:
            g = zocd_gradient(x, obj, cfg.b, mu_fd, streams.sample)
        if not np.all(np.isfinite(g)):
            raise NumericalAbort(f"non-finite {cfg.method} gradient estimate after {q} queries")
        x = x - eta * g
        q += cost
        qs.append(q)
        fs.append(float(obj.full_value(x)))
    return np.array(qs, dtype=np.int64), np.array(fs)


def trajectory(cfg: ExperimentConfig, obj: FiniteSumObjective, x0, eta: float, seed: int, trial: int,
               budget: int) -> tuple[np.ndarray, np.ndarray]:
    """One run of ``cfg.method`` until its cost reaches ``budget``; returns (queries, f) per iterate.

    ``f`` is instrumentation and never charged to the budget.
    """
    if cfg.method in ("rsgf", "zocd"):
        return _baseline_trajectory(cfg, obj, x0, eta, make_streams(seed, trial), budget)
    dist = DirectionDistribution(DirectionKind(cfg.direction), obj.dim)
    plan = Plan(eta=eta, T=0, b=cfg.b, m=cfg.m)
    if cfg.method.startswith("momentum_"):
        tr = run_momentum(x0, plan, dist, obj, cfg.beta, cfg.method.split("_", 1)[1], seed, trial,
                          max_queries=budget)
        recs = tr.records
    else:
        if cfg.method == "mi2p":
            est = MinibatchEstimator(cfg.b)
        elif cfg.method == "vr_mi2p":
            est = VrSymmetricEstimator(cfg.b, cfg.m)
        else:
            est = HelperEstimator(HelperSpec(cfg.delta, cfg.helper_mode))
        recs = run(x0, plan, dist, est, obj, make_streams(seed, trial), max_queries=budget)
    q = np.array([r.cost for r in recs], dtype=np.int64)
    f = np.array([r.f_true for r in recs])
    if not np.all(np.isfinite(f)):
        raise NumericalAbort(f"{cfg.method} diverged (non-finite objective)")
    return q, f


# ---- pilot -------------------------------------------------------------------

def _pilot_seed(seed: int) -> int:
    return int(stream(seed, 0, "pilot").integers(2 ** 63 - 1))


def pilot_scores(cfg: ExperimentConfig, obj=None, x0=None) -> list[tuple[float, float]]:
    """Final ``f`` of one short run per grid step size (``inf`` if it diverged)."""
    if obj is None:
        obj, x0 = build_objective(cfg)
    budget = max(1, int(cfg.pilot_fraction * cfg.total_budget))
    seed = _pilot_seed(cfg.seed)
    out = []
    for eta in cfg.pilot_grid:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                _, f = trajectory(cfg, obj, x0, float(eta), seed, 0, budget)
            score = float(f[-1])
        except (NumericalAbort, FloatingPointError, OverflowError):
            score = math.inf
        out.append((float(eta), score if math.isfinite(score) else math.inf))
    return out


def pilot_tune(cfg: ExperimentConfig, obj=None, x0=None) -> float:
    """Grid step size with the least final ``f`` after a short run (first one on ties)."""
    if len(cfg.pilot_grid) == 1:
        return float(cfg.pilot_grid[0])
    scores = pilot_scores(cfg, obj, x0)
    best = min(range(len(scores)), key=lambda i: scores[i][1])
    if not math.isfinite(scores[best][1]):
        raise NumericalAbort(f"every pilot step size diverged; grid = {[e for e, _ in scores]}")
    return scores[best][0]


# ---- aggregation -------------------------------------------------------------

def checkpoint_grid(budget: int, points: int = 100) -> np.ndarray:
    """``points`` evenly spaced query counts from 0 to ``budget`` (rounded to integers)."""
    if points == 1:
        return np.array([int(budget)], dtype=np.int64)
    return np.rint(np.linspace(0, budget, points)).astype(np.int64)


def interpolate(queries, f, grid) -> np.ndarray:
    """Last value carried forward: ``f`` of the latest iterate with ``queries <= g``."""
    pos = np.searchsorted(np.asarray(queries), np.asarray(grid), side="right") - 1
    return np.asarray(f)[np.maximum(pos, 0)]


@dataclass
class AggregateCurve:
    method: str
    b: int
    queries: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    finals: list[float] = field(default_factory=list)
    eta: float = math.nan
    label: str = ""

    def __post_init__(self):
        if not self.label:
            self.label = self.method

    @property
    def lo(self) -> np.ndarray:
        return self.mean - self.sd

    @property
    def hi(self) -> np.ndarray:
        return self.mean + self.sd

    @property
    def final_mean(self) -> float:
        return float(np.mean(self.finals))

    @property
    def final_sd(self) -> float:
        return float(np.std(self.finals, ddof=1)) if len(self.finals) > 1 else 0.0


def aggregate(method: str, b: int, grid, per_trial: list[tuple[np.ndarray, np.ndarray]],
              eta: float = math.nan) -> AggregateCurve:
    """Mean and sample s.d. across trials at each checkpoint."""
    values = np.array([interpolate(q, f, grid) for q, f in per_trial])
    sd = values.std(axis=0, ddof=1) if len(per_trial) > 1 else np.zeros(len(grid))
    return AggregateCurve(method, b, np.asarray(grid), values.mean(axis=0), sd,
                          [float(f[-1]) for _, f in per_trial], float(eta))


# ---- output ------------------------------------------------------------------

def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_trial_csv(path, queries, f) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["queries", "f_true"])
        for q, v in zip(queries, f):
            w.writerow([int(q), repr(float(v))])


def write_curve_csv(curve: AggregateCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["queries", "mean", "lo", "hi"])
        for q, m, lo, hi in zip(curve.queries, curve.mean, curve.lo, curve.hi):
            w.writerow([int(q), repr(float(m)), repr(float(lo)), repr(float(hi))])


def read_curve_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "queries": np.array([int(r["queries"]) for r in rows], dtype=np.int64),
        "mean": np.array([float(r["mean"]) for r in rows]),
        "lo": np.array([float(r["lo"]) for r in rows]),
        "hi": np.array([float(r["hi"]) for r in rows]),
    }


PLOT_STUB = '''"""Plot f(x) against queries from the *_agg.csv files in this directory."""
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
fig, ax = plt.subplots()
for path in sorted(glob.glob(os.path.join(here, "*_agg.csv"))):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    q = [int(r["queries"]) for r in rows]
    ax.plot(q, [float(r["mean"]) for r in rows], label=os.path.basename(path)[:-8])
    ax.fill_between(q, [float(r["lo"]) for r in rows], [float(r["hi"]) for r in rows], alpha=0.2)
ax.set_xlabel("queries")
ax.set_ylabel("f(x)")
ax.legend()
fig.savefig(os.path.join(here, "curves.png"), dpi=150)
'''


def emit_plot_data(curves: list[AggregateCurve], path) -> list[Path]:
    """One ``<label>_agg.csv`` per curve plus ``plot_curves.py``; returns the written paths."""
    if not curves:
        raise ValueError("no curves to emit")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for c in curves:
        p = out / f"{c.label}_agg.csv"
        write_curve_csv(c, p)
        written.append(p)
    stub = out / "plot_curves.py"
    stub.write_text(PLOT_STUB)
    written.append(stub)
    return written


# ---- experiments -------------------------------------------------------------

def _trial_job(args):
    cfg, obj, x0, eta, trial, budget = args
    return trajectory(cfg, obj, x0, eta, cfg.seed, trial, budget)


def run_trials(cfg: ExperimentConfig, obj, x0, eta: float) -> list[tuple[np.ndarray, np.ndarray]]:
    budget = cfg.total_budget
    jobs = [(cfg, obj, x0, eta, k, budget) for k in range(cfg.trials)]
    if cfg.jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, cfg.trials)) as ex:
            return list(ex.map(_trial_job, jobs))
    return [_trial_job(j) for j in jobs]


def run_experiment(cfg: ExperimentConfig, write: bool = True, obj=None, x0=None,
                   label: str | None = None) -> AggregateCurve:
    """Pilot (if asked), ``cfg.trials`` budgeted runs, aggregation and CSV output in ``cfg.out``."""
    if obj is None:
        obj, x0 = build_objective(cfg)
    eta = pilot_tune(cfg, obj, x0) if cfg.eta == "pilot" else float(cfg.eta)
    log.info("%s b=%d: eta=%r", cfg.method, cfg.b, eta)
    per_trial = run_trials(cfg, obj, x0, eta)
    curve = aggregate(cfg.method, cfg.b, checkpoint_grid(cfg.total_budget, cfg.checkpoints), per_trial, eta)
    if label:
        curve.label = label
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        for k, (q, f) in enumerate(per_trial):
            write_trial_csv(out / f"{curve.label}_trial{k}.csv", q, f)
        write_curve_csv(curve, out / f"{curve.label}_agg.csv")
    return curve


def sweep_batch(cfg: ExperimentConfig, methods, batch_sizes, write: bool = True) -> list[AggregateCurve]:
    """Every method at every batch size, one output subdirectory ``b<b>`` per panel.

    Within a panel all methods share the budget (``budget_iters * 2b`` if set).
    Also writes ``summary.csv`` with the pilot step and final-value statistics.
    """
    obj, x0 = build_objective(cfg)
    curves = []
    for b in batch_sizes:
        panel = []
        for method in methods:
            sub = cfg.replace(method=method, b=int(b), out=os.path.join(cfg.out, f"b{int(b)}"))
            panel.append(run_experiment(sub, write=write, obj=obj, x0=x0))
        if write:
            emit_plot_data(panel, os.path.join(cfg.out, f"b{int(b)}"))
        curves.extend(panel)
    if write:
        with open(Path(cfg.out) / "summary.csv", "w", newline="") as fh:
            w = _writer(fh)
            w.writerow(["method", "b", "eta", "budget", "mean_final_f", "sd_final_f"])
            for c in curves:
                budget = cfg.replace(b=c.b).total_budget
                w.writerow([c.method, c.b, repr(c.eta), budget, repr(c.final_mean), repr(c.final_sd)])
    return curves


def sweep_beta(cfg: ExperimentConfig, betas, variant: str = "heavyball",
               write: bool = True) -> list[tuple[float, float, float]]:
    """Final ``f`` against ``beta`` for one momentum variant at equal iteration budgets.

    The step size is ``cfg.eta`` or, with ``"pilot"``, the one tuned for plain
    minibatch search (``beta = 1``). Iterations: ``total_budget // 2b``.
    """
    obj, x0 = build_objective(cfg)
    if cfg.eta == "pilot":
        eta = pilot_tune(cfg.replace(method="mi2p"), obj, x0)
    else:
        eta = float(cfg.eta)
    dist = DirectionDistribution(DirectionKind(cfg.direction), obj.dim)
    plan = Plan(eta=eta, T=max(1, cfg.total_budget // (2 * cfg.b)), b=cfg.b)
    rows = beta_sweep(obj, dist, plan, betas, cfg.trials, cfg.seed, x0, variant)
    if write:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, Path(cfg.out) / f"beta_sweep_{variant}.csv")
    return rows
