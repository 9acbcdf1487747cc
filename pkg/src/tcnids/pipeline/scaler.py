"""Per-feature standardisation fitted on training rows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError


@dataclass
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray
    feature_names: list

    @property
    def constant(self) -> np.ndarray:
        return self.std == 0

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "feature_names": list(self.feature_names),
                "constant": [n for n, c in zip(self.feature_names, self.constant) if c]}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64),
                   list(d["feature_names"]))


def fit_scaler(X, feature_names=None) -> ScalerParams:
    """Mean and population standard deviation of each column."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ArgumentError(f"fit_scaler needs a non-empty 2-D matrix, got shape {X.shape}")
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise ArgumentError(f"{len(names)} feature names for {X.shape[1]} columns")
    mean = X.mean(axis=0)
    std = np.sqrt(((X - mean) ** 2).mean(axis=0))
    return ScalerParams(mean, std, names)


def apply_scaler(params: ScalerParams, X, feature_names=None) -> np.ndarray:
    """``(x - mean) / std``; zero-variance columns map to 0."""
    X = np.asarray(X, dtype=np.float64)
    if feature_names is not None and list(feature_names) != params.feature_names:
        missing = sorted(set(params.feature_names) - set(feature_names))
        extra = sorted(set(feature_names) - set(params.feature_names))
        raise ArgumentError(f"feature names differ from the fitted scaler "
                            f"(missing {missing}, extra {extra}, or reordered)")
    if X.ndim != 2 or X.shape[1] != len(params.feature_names):
        raise ArgumentError(f"expected {len(params.feature_names)} columns, got shape {X.shape}")
    safe = np.where(params.constant, 1.0, params.std)
    out = (X - params.mean) / safe
    out[:, params.constant] = 0.0
    return out
