"""Chi-squared feature ranking on non-negative feature mass."""
from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import ArgumentError

log = logging.getLogger(__name__)


def chi2_scores(X, y) -> np.ndarray:
    """Per-feature statistic ``sum_c (O_c - E_c)^2 / E_c``.

    ``O_c`` is the feature mass in class ``c`` and ``E_c`` that mass spread
    by class prior. Sums are exact (``math.fsum``), so the result does not
    depend on row order.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ArgumentError(f"X shape {X.shape} does not match {y.shape[0]} labels")
    n = X.shape[0]
    classes, counts = np.unique(y, return_counts=True)
    observed = np.array([[math.fsum(col) for col in X[y == c].T] for c in classes])
    observed = observed.reshape(len(classes), X.shape[1])
    totals = np.array([math.fsum(col) for col in X.T]) if n else np.zeros(X.shape[1])
    stats = np.zeros(X.shape[1])
    # a constant column is independent of the class by construction; the float
    # sums above are not exactly proportional to the priors, so pin it to 0
    constant = (X == X[:1]).all(axis=0) if n else np.ones(X.shape[1], dtype=bool)
    for f in range(X.shape[1]):
        if constant[f]:
            continue
        terms = []
        for ci, nc in enumerate(counts):
            expected = nc / n * totals[f]
            if expected > 0:
                terms.append((observed[ci, f] - expected) ** 2 / expected)
        stats[f] = math.fsum(terms)
    return stats


def chi2_rank(X, y, feature_names):
    """``[(name, statistic), ...]`` sorted by statistic descending, then name."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != len(feature_names):
        raise ArgumentError(f"{X.shape[1]} columns but {len(feature_names)} feature names")
    negative = np.flatnonzero((X < 0).any(axis=0))
    if negative.size:
        raise ArgumentError(
            f"chi-squared ranking needs non-negative features; "
            f"{feature_names[negative[0]]!r} has negative values")
    stats = chi2_scores(X, y)
    return sorted(zip(feature_names, stats.tolist()), key=lambda kv: (-kv[1], kv[0]))


def select_top_k(ranking, k=None, warnings=None):
    """Names of the ``k`` highest-ranked features (all of them when ``k`` is None)."""
    if k is None:
        return [name for name, _ in ranking]
    if k < 0:
        raise ArgumentError(f"k must be >= 0, got {k}")
    if k > len(ranking):
        message = f"select_top_k: k={k} exceeds the {len(ranking)} ranked features; keeping all"
        log.warning(message)
        if warnings is not None:
            warnings.append(message)
    return [name for name, _ in ranking[:k]]
