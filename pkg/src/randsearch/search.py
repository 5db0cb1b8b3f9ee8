"""Sign-of-difference random search, its parameter planner and run traces."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .directions import DirectionDistribution
from .estimators import EstimatePair, Estimator
from .objectives import FiniteSumObjective, TheoryConstants
from .rng import Streams, make_streams

log = logging.getLogger(__name__)

__all__ = [
    "NumericalAbort",
    "RunRecord",
    "SearchState",
    "Plan",
    "PlanRegime",
    "sign",
    "srs_step",
    "run",
    "plan_parameters",
    "vr_calls",
]


class NumericalAbort(ArithmeticError):
    """An estimate or iterate became non-finite."""


def sign(v: float) -> int:
    """``sign`` with the tie convention ``sign(0) = +1``."""
    return -1 if v < 0 else 1


@dataclass(frozen=True)
class RunRecord:
    t: int
    queries: int
    f_true: float
    grad_norm: float | None = None
    step_sign: int = 0
    helper_calls: int = 0
    nominal_queries: int = 0

    @property
    def cost(self) -> int:
        return self.queries + self.helper_calls


@dataclass
class SearchState:
    """Iterate, counters and trace of one run. ``trace`` is the instrumentation ledger."""

    x: np.ndarray
    eta: float
    t: int = 0
    cumulative_queries: int = 0
    helper_calls: int = 0
    nominal_queries: int = 0
    trace: list[RunRecord] = field(default_factory=list)

    @property
    def cost(self) -> int:
        return self.cumulative_queries + self.helper_calls


def _record(state: SearchState, obj: FiniteSumObjective, step_sign: int, track_grad: bool) -> None:
    # f_true and grad_norm are instrumentation; never charged to the query budget
    gn = float(np.linalg.norm(obj.full_gradient(state.x))) if track_grad else None
    state.trace.append(RunRecord(state.t, state.cumulative_queries, float(obj.full_value(state.x)),
                                 gn, step_sign, state.helper_calls, state.nominal_queries))


def initial_state(x0, eta: float, obj: FiniteSumObjective, track_grad: bool = False) -> SearchState:
    state = SearchState(np.array(x0, dtype=float), float(eta))
    _record(state, obj, 0, track_grad)
    return state


def srs_step(state: SearchState, dist: DirectionDistribution, estimator: Estimator,
             obj: FiniteSumObjective, rng: Streams, track_grad: bool = False,
             record: bool = True) -> SearchState:
    """One iteration ``x <- x - eta * sign(M+ - M-) * s``; mutates and returns ``state``."""
    if not state.eta > 0:
        raise ValueError(f"step size must be positive, got {state.eta}")
    s = dist.draw(rng.direction)
    step = state.eta * s
    pair: EstimatePair = estimator(obj, state.x + step, state.x - step, rng.sample)
    if not (math.isfinite(pair.m_plus) and math.isfinite(pair.m_minus)):
        raise NumericalAbort(f"non-finite estimates at t={state.t}: M+={pair.m_plus}, M-={pair.m_minus}")
    sg = sign(pair.m_plus - pair.m_minus)
    state.x = state.x - sg * step
    state.t += 1
    state.cumulative_queries += pair.queries
    state.helper_calls += pair.helper_calls
    state.nominal_queries += pair.nominal_queries if pair.nominal_queries is not None else pair.queries
    if record:
        _record(state, obj, sg, track_grad)
    return state


def run(x0, plan: "Plan", dist: DirectionDistribution, estimator: Estimator, obj: FiniteSumObjective,
        rng, max_iters: int | None = None, max_queries: int | None = None,
        track_grad: bool = False) -> list[RunRecord]:
    """Run until ``max_iters`` (default ``plan.T``) or until the cost reaches ``max_queries``.

    ``rng`` is a seed or a :class:`Streams`. Cost counts component
    evaluations plus helper calls. The trace has one record per iterate,
    starting with ``x0``.
    """
    streams = rng if isinstance(rng, Streams) else make_streams(int(rng))
    if max_iters is None and max_queries is None:
        max_iters = plan.T
    estimator.reset()
    state = initial_state(x0, plan.eta, obj, track_grad)
    while True:
        if max_iters is not None and state.t >= max_iters:
            break
        if max_queries is not None and state.cost >= max_queries:
            break
        srs_step(state, dist, estimator, obj, streams, track_grad=track_grad)
    return state.trace


class PlanRegime(str, enum.Enum):
    AVG_SMOOTH = "avg-smooth"
    SAMPLE_SMOOTH = "sample-smooth"
    FINITE_SUM_VR = "finite-sum-vr"
    HELPER = "helper"


@dataclass
class Plan:
    """Step size, iteration budget, batch size and VR epoch length.

    ``caps`` maps each step-size cap considered to its value;
    ``caps_applied`` names the ones that were enforced.
    """

    eta: float
    T: int
    b: int = 1
    m: int = 1
    caps: dict[str, float] = field(default_factory=dict)
    caps_applied: list[str] = field(default_factory=list)
    binding: str = "manual"
    calls: float | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be positive and finite, got {self.eta}")
        if self.T < 0 or self.b < 1 or self.m < 1:
            raise ValueError(f"invalid plan sizes T={self.T}, b={self.b}, m={self.m}")
        for name in self.caps_applied:
            if self.eta > self.caps[name] * (1 + 1e-12):
                raise ValueError(f"eta={self.eta} violates cap {name}={self.caps[name]}")

    def describe(self) -> str:
        lines = [f"eta = {self.eta!r}", f"T = {self.T}", f"b = {self.b}", f"m = {self.m}",
                 f"binding = {self.binding}", f"caps_applied = {', '.join(self.caps_applied) or 'none'}"]
        for name in self.caps_applied:
            lines.append(f"cap {name} = {self.caps[name]!r}")
        if self.calls is not None:
            lines.append(f"calls = {self.calls!r}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def _ratio(num: float, den: float) -> float:
    return math.inf if den == 0 else num / den


def vr_batch(m: int, d: int, G: float, eps: float) -> int:
    """``b(m) = d m^2 G^2 / eps^2`` (unit constant), at least 1."""
    return max(1, math.ceil(d * m * m * G * G / (eps * eps)))


def vr_calls(m: int, T: float, n: int, b: int) -> float:
    """Component calls over ``T`` iterations with one full pass per epoch of ``m``."""
    return T / m * (n + (m - 1) * b)


def _vr_epoch(n: int, d: int, G: float, eps: float) -> tuple[int, float, list[str]]:
    notes = []
    r = n * eps * eps / (d * G * G) if G > 0 else math.inf
    m_star = min(r ** (1.0 / 3.0), r ** 0.5)
    m0 = max(1, math.floor(min(m_star, n)))
    m = m0
    while m > 1 and vr_batch(m, d, G, eps) > n:
        m -= 1
    if m < m0:
        log.warning("b(m*) > n; epoch length reduced to m=%d", m)
        notes.append(f"b(m*) exceeds n; fell back to largest m with b(m) <= n (m={m})")
    return m, m_star, notes


def plan_parameters(regime, constants: TheoryConstants, epsilon: float, n: int, dim: int,
                    delta: float = 0.0, T: int | None = None) -> Plan:
    """Parameters from the complexity bounds with every big-O constant set to one.

    ``T = d L1/eps + d L0 F0/eps^2`` in every regime. Batch sizes:
    ``(d L0 sigma0)^2/eps^4`` (average smoothness), ``sigma1^2/eps^2``
    (sample smoothness), ``d m^2 G^2/eps^2`` (finite-sum VR, capped at
    ``n``), 1 for the helper. The step size is the smallest of the regime's
    caps and the rate-optimizing value ``sqrt(F0/(L0 T))``. For the helper
    the optimizing value is ``sqrt(F0/(L0 T) + 2 delta/L0)``, the minimizer
    of ``F0/(eta T) + L0 eta/2 + 2 delta/eta`` up to a constant, which
    reduces to ``sqrt(F0/(L0 T))`` at ``delta = 0`` and to
    ``sqrt(2 delta/L0)`` once the helper error dominates. A given ``T``
    (an iteration budget) overrides the planned one.
    """
    regime = PlanRegime(regime)
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    c = constants
    d = int(dim)
    if T is None:
        T = max(1, math.ceil(d * c.L1 / epsilon + d * c.L0 * c.F0 / epsilon ** 2))
    notes: list[str] = []
    m = 1
    calls = None
    caps: dict[str, float] = {}
    if regime is PlanRegime.AVG_SMOOTH:
        b = max(1, math.ceil((d * c.L0 * c.sigma0) ** 2 / epsilon ** 4))
        caps["descent mu/L1"] = _ratio(c.mu_D, c.L1)
    elif regime is PlanRegime.SAMPLE_SMOOTH:
        b = max(1, math.ceil(c.sigma1 ** 2 / epsilon ** 2))
        caps["sample-smooth mu/(5 L1)"] = _ratio(c.mu_D, 5 * c.L1)
        caps["individual mu sqrt(b)/(32 sqrt2 L1)"] = _ratio(c.mu_D * math.sqrt(b), 32 * math.sqrt(2) * c.L1)
    elif regime is PlanRegime.FINITE_SUM_VR:
        m, m_star, vr_notes = _vr_epoch(n, d, c.G, epsilon)
        notes.extend(vr_notes)
        b = min(vr_batch(m, d, c.G, epsilon), n)
        calls = vr_calls(m, T, n, b)
        notes.append(f"m* = {m_star!r} (closed form), floored to m = {m}")
        notes.append("b(m) carries a factor d absent from the sample-smooth batch size; used as printed")
        caps["sample-smooth mu/(5 L1)"] = _ratio(c.mu_D, 5 * c.L1)
    else:
        b = 1
        caps["descent mu/L1"] = _ratio(c.mu_D, c.L1)

    candidates = dict(caps)
    if regime is PlanRegime.HELPER and delta > 0:
        candidates["helper sqrt((F0/T + 2 delta)/L0)"] = _ratio(math.sqrt(c.F0 / T + 2 * delta), math.sqrt(c.L0))
    else:
        candidates["rate sqrt(F0/(L0 T))"] = _ratio(math.sqrt(c.F0), math.sqrt(c.L0 * T)) if c.F0 > 0 else math.inf
    binding = min(candidates, key=candidates.get)
    eta = candidates[binding]
    if not math.isfinite(eta):
        raise ValueError("no finite step-size cap; constants are degenerate (L0 = L1 = 0 or F0 = 0)")
    if calls is None:
        calls = 2.0 * b * T
    return Plan(eta=eta, T=T, b=b, m=m, caps=candidates, caps_applied=list(caps), binding=binding,
                calls=calls, notes=notes)
