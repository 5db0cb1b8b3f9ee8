"""Random search directions and Monte Carlo estimates of their constants."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DirectionKind",
    "DirectionDistribution",
    "DirectionSample",
    "sample_direction",
    "estimate_mu",
    "second_moment_projection",
    "fallback_mu",
]

_CHUNK = 65536


class DirectionKind(str, enum.Enum):
    UNIT_SPHERE = "sphere"
    NORMALIZED_GAUSSIAN = "gaussian"
    SIGNED_COORDINATE = "coordinate"


@dataclass(frozen=True)
class DirectionDistribution:
    """Law of the search direction ``s``; every kind has ``E||s||^2 = 1``."""

    kind: DirectionKind
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", DirectionKind(self.kind))
        if int(self.dim) < 1:
            raise ValueError(f"direction dimension must be >= 1, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    @classmethod
    def parse(cls, name: str, dim: int) -> "DirectionDistribution":
        return cls(DirectionKind(name), dim)

    def draw(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw one direction (shape ``(d,)``) or ``size`` of them (``(size, d)``)."""
        d = self.dim
        k = 1 if size is None else int(size)
        if self.kind is DirectionKind.SIGNED_COORDINATE:
            out = np.zeros((k, d))
            idx = rng.integers(0, d, size=k)
            sgn = rng.integers(0, 2, size=k) * 2.0 - 1.0
            out[np.arange(k), idx] = sgn
        else:
            out = rng.standard_normal((k, d))
            if self.kind is DirectionKind.UNIT_SPHERE:
                norms = np.linalg.norm(out, axis=1)
                bad = norms == 0.0
                while bad.any():
                    out[bad] = rng.standard_normal((int(bad.sum()), d))
                    norms[bad] = np.linalg.norm(out[bad], axis=1)
                    bad = norms == 0.0
                out /= norms[:, None]
            else:
                out /= math.sqrt(d)
        return out[0] if size is None else out


@dataclass(frozen=True)
class DirectionSample:
    vector: np.ndarray
    distribution: DirectionDistribution


def sample_direction(dist: DirectionDistribution, rng: np.random.Generator) -> DirectionSample:
    """Draw a single direction ``s ~ D``; deterministic given the generator state."""
    return DirectionSample(dist.draw(rng), dist)


def _chunks(total: int):
    done = 0
    while done < total:
        k = min(_CHUNK, total - done)
        yield k
        done += k


def _mc_mean(values_fn, dist, samples, rng, return_stderr):
    if samples < 1:
        raise ValueError("samples must be >= 1")
    s1 = 0.0
    s2 = 0.0
    for k in _chunks(int(samples)):
        vals = values_fn(dist.draw(rng, k))
        s1 += float(vals.sum())
        s2 += float(np.square(vals).sum())
    mean = s1 / samples
    if not return_stderr:
        return mean
    var = max(s2 / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / max(samples - 1, 1))


def estimate_mu(dist: DirectionDistribution, g, samples: int, rng: np.random.Generator,
                return_stderr: bool = False):
    """Monte Carlo estimate of ``E|<g, s>| / ||g||``.

    Raises
    ------
    ZeroDivisionError
        If ``g`` is the zero vector.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (dist.dim,):
        raise ValueError(f"g has shape {g.shape}, expected ({dist.dim},)")
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        raise ZeroDivisionError("exploration constant undefined for g = 0")
    u = g / gn
    return _mc_mean(lambda S: np.abs(S @ u), dist, samples, rng, return_stderr)


def second_moment_projection(dist: DirectionDistribution, v, samples: int,
                             rng: np.random.Generator, return_stderr: bool = False):
    """Monte Carlo estimate of ``E<v, s>^2`` (equals ``||v||^2 / d`` on the sphere)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (dist.dim,):
        raise ValueError(f"v has shape {v.shape}, expected ({dist.dim},)")
    return _mc_mean(lambda S: np.square(S @ v), dist, samples, rng, return_stderr)


def fallback_mu(dim: int) -> float:
    """Large-``d`` value of the sphere exploration constant, ``sqrt(2 / (pi d))``."""
    return math.sqrt(2.0 / (math.pi * dim))
