"""Seeded random streams keyed by (seed, trial, purpose).

Each purpose gets its own independent generator so that, e.g., turning the
helper noise on or off never perturbs the sequence of search directions.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# stable purpose ids; never renumber, recorded runs depend on them
PURPOSES = {
    "direction": 0,
    "sample": 1,
    "pilot": 2,
    "init": 3,
    "data": 4,
    "diagnostic": 5,
}


def stream(seed: int, trial: int = 0, purpose: str = "direction") -> np.random.Generator:
    """Return the generator for one (seed, trial, purpose) triple."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial), PURPOSES[purpose]))
    return np.random.Generator(np.random.PCG64(ss))


class Streams(NamedTuple):
    """The two streams consumed by an optimizer step."""

    direction: np.random.Generator
    sample: np.random.Generator


def make_streams(seed: int, trial: int = 0) -> Streams:
    return Streams(stream(seed, trial, "direction"), stream(seed, trial, "sample"))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
