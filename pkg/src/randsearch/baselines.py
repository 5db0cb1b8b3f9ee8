"""Finite-difference gradient-estimation baselines (RSGF and ZO-CD)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .directions import DirectionDistribution, DirectionKind
from .objectives import FiniteSumObjective
from .search import NumericalAbort

__all__ = ["SmoothingParams", "rsgf_gradient", "rsgf_step", "rsgf_cost",
           "zocd_gradient", "zocd_step", "zocd_cost", "default_mu_fd"]


def default_mu_fd(dim: int) -> float:
    return 1e-4 * math.sqrt(dim)


@dataclass(frozen=True)
class SmoothingParams:
    mu_fd: float
    step: float

    def __post_init__(self):
        if not self.mu_fd > 0:
            raise ValueError(f"finite-difference radius must be positive, got {self.mu_fd}")
        if not self.step > 0:
            raise ValueError(f"step size must be positive, got {self.step}")


def rsgf_cost(b: int) -> int:
    return 2 * b


def zocd_cost(b: int, dim: int) -> int:
    return 2 * b * dim


def _indices(obj, b, rng, full):
    if full:
        return np.arange(obj.n)
    if b < 1:
        raise ValueError(f"batch size must be >= 1, got {b}")
    return rng.integers(0, obj.n, size=int(b))


def rsgf_gradient(x, obj: FiniteSumObjective, b: int, mu_fd: float, rng: np.random.Generator,
                  full_enumeration: bool = False, u=None) -> np.ndarray:
    """Forward difference along a unit-sphere direction, one batch for both points."""
    x = np.asarray(x, dtype=float)
    if u is None:
        u = DirectionDistribution(DirectionKind.UNIT_SPHERE, obj.dim).draw(rng)
    idx = _indices(obj, b, rng, full_enumeration)
    vals = obj.batch_mean(idx, np.stack([x + mu_fd * u, x]))
    return (vals[0] - vals[1]) / mu_fd * u


def rsgf_step(x, obj: FiniteSumObjective, b: int, params: SmoothingParams, rng: np.random.Generator,
              full_enumeration: bool = False) -> np.ndarray:
    """``x - eta * g``; costs ``2b`` component evaluations."""
    g = rsgf_gradient(x, obj, b, params.mu_fd, rng, full_enumeration)
    if not np.all(np.isfinite(g)):
        raise NumericalAbort("non-finite RSGF gradient estimate")
    return np.asarray(x, dtype=float) - params.step * g


def zocd_gradient(x, obj: FiniteSumObjective, b: int, mu_fd: float, rng: np.random.Generator,
                  full_enumeration: bool = False) -> np.ndarray:
    """Central differences along every coordinate, one batch reused for all ``2d`` points."""
    x = np.asarray(x, dtype=float)
    d = obj.dim
    idx = _indices(obj, b, rng, full_enumeration)
    E = mu_fd * np.eye(d)
    vals = obj.batch_mean(idx, np.concatenate([x + E, x - E]))
    return (vals[:d] - vals[d:]) / (2.0 * mu_fd)


def zocd_step(x, obj: FiniteSumObjective, b: int, params: SmoothingParams, rng: np.random.Generator,
              full_enumeration: bool = False) -> np.ndarray:
    """``x - alpha * g``; costs ``2bd`` component evaluations."""
    g = zocd_gradient(x, obj, b, params.mu_fd, rng, full_enumeration)
    if not np.all(np.isfinite(g)):
        raise NumericalAbort("non-finite ZO-CD gradient estimate")
    return np.asarray(x, dtype=float) - params.step * g
