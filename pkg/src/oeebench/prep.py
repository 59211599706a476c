"""Data preparation: outlier fencing, z-scaling, correlation ranking, splits."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .oee import Dataset


@dataclass(frozen=True, eq=False)
class ScalerParams:
    mean: np.ndarray
    sd: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> ScalerParams:
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["sd"], dtype=float))


@dataclass(frozen=True, eq=False)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    folds: tuple[np.ndarray, ...]

    def complement(self, i: int) -> np.ndarray:
        """Training indices for fold ``i`` (every other fold, in fold order)."""
        return np.concatenate([f for j, f in enumerate(self.folds) if j != i])


def iqr_fences(values: np.ndarray, multiplier: float = 1.5) -> tuple[float, float]:
    """Tukey fences with type-7 (linear interpolation) quartiles."""
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25.0, 75.0])
    spread = q3 - q1
    return float(q1 - multiplier * spread), float(q3 + multiplier * spread)


def remove_outliers(dataset: Dataset, multiplier: float = 1.5) -> tuple[Dataset, np.ndarray]:
    """Drop rows whose OEE falls outside the IQR fences.

    Returns the cleaned dataset and the indices (into the input) that were removed.
    """
    if len(dataset) == 0:
        raise DomainError("cannot fence an empty dataset")
    lo, hi = iqr_fences(dataset.target, multiplier)
    outside = (dataset.target < lo) | (dataset.target > hi)
    removed = np.flatnonzero(outside)
    kept = np.flatnonzero(~outside)
    return dataset.subset(kept), removed


def fit_scaler(train_rows: np.ndarray) -> ScalerParams:
    rows = np.asarray(train_rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise DomainError("scaler needs at least 2 rows")
    return ScalerParams(rows.mean(axis=0), rows.std(axis=0))


def apply_scaler(params: ScalerParams, rows: np.ndarray) -> np.ndarray:
    """z-score each column; zero-variance columns map to 0."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != params.mean.shape[0]:
        raise DomainError(
            f"row width {rows.shape[-1]} does not match scaler width {params.mean.shape[0]}"
        )
    safe = np.where(params.sd > 0, params.sd, 1.0)
    z = (rows - params.mean) / safe
    z[:, params.sd == 0] = 0.0
    return z


def invert_scaler(params: ScalerParams, z: np.ndarray) -> np.ndarray:
    return np.asarray(z, dtype=float) * params.sd + params.mean


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        return 0.0
    return float(dx @ dy) / math.sqrt(sxx * syy)


def correlation_rank(dataset: Dataset) -> list[tuple[str, float]]:
    """Features ordered by |Pearson r| against the OEE target, strongest first.

    The second element of each pair is the signed r; ties keep column order.
    """
    if len(dataset) < 3:
        raise DomainError("correlation ranking needs at least 3 rows")
    if np.all(dataset.target == dataset.target[0]):
        raise DomainError("target is constant; correlation undefined")
    scored = [
        (name, pearson(dataset.rows[:, j], dataset.target))
        for j, name in enumerate(dataset.feature_names)
    ]
    return sorted(scored, key=lambda item: -abs(item[1]))


def select_features(dataset: Dataset, n_keep: int) -> Dataset:
    ranked = correlation_rank(dataset)[:n_keep]
    keep = [name for name, _ in ranked]
    cols = [dataset.feature_names.index(name) for name in dataset.feature_names if name in keep]
    names = tuple(dataset.feature_names[c] for c in cols)
    return Dataset(names, dataset.rows[:, cols], dataset.target, dataset.provenance)


def train_test_split(dataset: Dataset, ratio: float = 0.85, seed: int = 0) -> SplitIndices:
    n = len(dataset)
    if n == 0:
        raise DomainError("cannot split an empty dataset")
    if not 0.0 < ratio < 1.0:
        raise DomainError(f"split ratio must lie in (0, 1), got {ratio}")
    perm = np.random.default_rng(seed).permutation(n)
    # tolerance keeps exact products such as 0.85 * 100 from rounding up
    n_train = min(n, math.ceil(ratio * n - 1e-9))
    return SplitIndices(train=perm[:n_train], test=perm[n_train:])


def kfold(train_indices: np.ndarray, k: int = 10, seed: int = 0) -> FoldPlan:
    train_indices = np.asarray(train_indices, dtype=int)
    if k < 2:
        raise DomainError("k-fold needs k >= 2")
    if k > train_indices.shape[0]:
        raise DomainError(f"k = {k} exceeds {train_indices.shape[0]} training rows")
    shuffled = train_indices[np.random.default_rng(seed).permutation(train_indices.shape[0])]
    return FoldPlan(k, tuple(np.array_split(shuffled, k)))
