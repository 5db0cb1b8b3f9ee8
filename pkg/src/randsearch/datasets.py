"""Binary classification data for the logistic benchmark.

CSV layout: a header row, one column named ``label`` holding +1/-1 (0/1 is
mapped to -1/+1 with a warning), every other column numeric.
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

__all__ = ["DataError", "load_csv", "synthetic_classification", "sklearn_breast_cancer", "load_dataset"]


class DataError(ValueError):
    """Malformed or unreadable dataset."""


def standardize(features: np.ndarray) -> np.ndarray:
    mu = features.mean(axis=0)
    sd = features.std(axis=0)
    sd[sd == 0] = 1.0
    return (features - mu) / sd


def load_csv(path, standardize_features: bool = True) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "label" not in header:
        raise DataError(f"{path}: no 'label' column in header {header}")
    li = header.index("label")
    feat_cols = [k for k in range(len(header)) if k != li]
    if not feat_cols:
        raise DataError(f"{path}: no feature columns")
    X = np.empty((len(rows) - 1, len(feat_cols)))
    y = np.empty(len(rows) - 1)
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        try:
            y[r - 2] = float(row[li])
            X[r - 2] = [float(row[k]) for k in feat_cols]
        except ValueError:
            bad = next(k for k in range(len(row)) if not _is_float(row[k]))
            raise DataError(f"{path}: row {r}, column '{header[bad]}': not a number: {row[bad]!r}") from None
    if X.shape[0] == 0:
        raise DataError(f"{path}: no data rows")
    labels = set(np.unique(y).tolist())
    if labels <= {0.0, 1.0}:
        log.warning("%s: 0/1 labels mapped to -1/+1", path)
        y = 2.0 * y - 1.0
    elif not labels <= {-1.0, 1.0}:
        raise DataError(f"{path}: labels must be +-1 or 0/1, found {sorted(labels)[:5]}")
    if standardize_features:
        X = standardize(X)
    return X, y


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def synthetic_classification(n: int = 455, d: int = 30, seed: int = 0, separation: float = 1.0,
                             standardize_features: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Two Gaussian clusters with correlated features, shaped like the Breast Cancer task.

    The class means are ``+-separation/2`` along a random unit direction,
    and features share a low-rank common factor so the problem is not
    isotropic.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, 4)))
    y = np.where(rng.random(n) < 0.37, -1.0, 1.0)
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    mixing = rng.standard_normal((d, 3)) / math.sqrt(3)
    X = rng.standard_normal((n, d)) + rng.standard_normal((n, 3)) @ mixing.T
    X += 0.5 * separation * y[:, None] * direction[None, :] * math.sqrt(d)
    if standardize_features:
        X = standardize(X)
    return X, y


def sklearn_breast_cancer(seed: int = 0, train_size: int = 455,
                          standardize_features: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Breast Cancer Wisconsin training split, from the copy bundled with scikit-learn."""
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise DataError("scikit-learn is required for the 'breast-cancer' dataset") from exc
    data = load_breast_cancer()
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.data.shape[0])[:train_size]
    X = data.data[perm].astype(float)
    y = np.where(data.target[perm] == 1, 1.0, -1.0)
    if standardize_features:
        X = standardize(X)
    return X, y


def load_dataset(spec: str, seed: int = 0, standardize_features: bool = True):
    """``"synthetic"``, ``"breast-cancer"`` or a CSV path."""
    if spec == "synthetic":
        return synthetic_classification(seed=seed, standardize_features=standardize_features)
    if spec == "breast-cancer":
        return sklearn_breast_cancer(seed=seed, standardize_features=standardize_features)
    return load_csv(spec, standardize_features=standardize_features)
