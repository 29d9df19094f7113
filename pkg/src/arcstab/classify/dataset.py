from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..features import FEATURE_NAMES, FeatureVector
from ..signal import CLASS_ORDER, RegimeLabel


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with integer class labels.

    ``y`` holds indices into :data:`~arcstab.signal.CLASS_ORDER`
    (0 = Transient, 1 = Stable, 2 = Extinction).
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("X must be 2-D (samples x features)")
        if len(X) != len(y):
            raise ValueError(f"{len(X)} feature rows but {len(y)} labels")
        if X.shape[1] != len(self.feature_names):
            raise ValueError(f"{X.shape[1]} columns but {len(self.feature_names)} feature names")
        if not np.all(np.isfinite(X)):
            raise ValueError("dataset contains non-finite feature values")
        if len(y) and (y.min() < 0 or y.max() >= len(CLASS_ORDER)):
            raise ValueError("labels must be class indices 0..2")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return len(self.y)

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector],
                     labels: Sequence[RegimeLabel | str]) -> "Dataset":
        X = np.array([v.as_array() for v in vectors]).reshape(len(vectors), len(FEATURE_NAMES))
        y = [RegimeLabel.parse(lab).index for lab in labels]
        return cls(X, y)

    @property
    def labels(self) -> list[RegimeLabel]:
        return [CLASS_ORDER[i] for i in self.y]

    def class_counts(self) -> dict[RegimeLabel, int]:
        counts = np.bincount(self.y, minlength=len(CLASS_ORDER))
        return {c: int(n) for c, n in zip(CLASS_ORDER, counts)}

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.feature_names)

    def with_column(self, name: str, values) -> "Dataset":
        values = np.asarray(values, dtype=np.float64).reshape(-1, 1)
        return Dataset(np.hstack([self.X, values]), self.y, self.feature_names + (name,))

    def with_X(self, X) -> "Dataset":
        return Dataset(X, self.y, self.feature_names)


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-scoring fitted on training data.

    Columns with zero spread are dropped; ``mask`` marks the retained ones.
    """

    mean: np.ndarray
    std: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        mask = np.ones(len(mean), bool) if self.mask is None else np.asarray(self.mask, bool)
        if np.any(std[mask] <= 0):
            raise ValueError("retained features must have positive std")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "mask", mask)

    @property
    def n_in(self) -> int:
        return len(self.mean)

    @property
    def n_out(self) -> int:
        return int(self.mask.sum())

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.n_in:
            raise ValueError(f"expected {self.n_in} features, got {X2.shape[1]}")
        Z = (X2[:, self.mask] - self.mean[self.mask]) / self.std[self.mask]
        return Z[0] if single else Z

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "mask": self.mask.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["mean"], float), np.array(d["std"], float), np.array(d["mask"], bool))


def fit_standardizer(train: Dataset | np.ndarray) -> Standardizer:
    X = train.X if isinstance(train, Dataset) else np.asarray(train, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("cannot fit a standardizer on an empty training set")
    # reduce over sorted columns so row order cannot change the last bit
    Xs = np.sort(X, axis=0)
    mean = Xs.mean(axis=0)
    std = Xs.std(axis=0)
    # a column is constant when its spread is at rounding level of its magnitude
    keep = std > 1e-12 * np.maximum(np.abs(mean), np.finfo(float).tiny)
    safe_std = np.where(keep, std, 1.0)
    return Standardizer(mean, safe_std, keep)
