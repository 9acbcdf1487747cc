"""Stratified down-sampling and train/validation/test partitioning."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError
from ..numerics import Rng
from ..optim import Split

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.7, 0.1, 0.2)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def sample_counts(class_counts, fraction):
    """Rows kept per class: ``round(fraction * n)``, at least one when ``n >= 1``."""
    if not 0.0 < fraction <= 1.0:
        raise ArgumentError(f"fraction must be in (0, 1], got {fraction}")
    return {c: (max(1, _round_half_up(fraction * n)) if n >= 1 else 0)
            for c, n in class_counts.items()}


def stratified_indices(labels, fraction: float, rng: Rng) -> np.ndarray:
    """Sorted row indices of a per-class uniform sample without replacement."""
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    quota = sample_counts(dict(zip(classes.tolist(), counts.tolist())), fraction)
    chosen = []
    for c in classes.tolist():
        rows = np.flatnonzero(labels == c)
        chosen.append(rows[rng.choice(len(rows), size=quota[c], replace=False)])
    return np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=np.int64)


def stratified_sample(table, labels, fraction: float, rng: Rng):
    """Returns ``(sampled_table, sampled_labels)``; ``table`` is a RawTable or array."""
    idx = stratified_indices(labels, fraction, rng)
    sampled = table.take(idx) if hasattr(table, "take") else np.asarray(table)[idx]
    return sampled, np.asarray(labels)[idx]


def largest_remainder(n: int, fractions) -> list:
    """Split ``n`` into integer parts proportional to ``fractions`` (Hamilton's method).

    Remainder ties go to the earlier part.
    """
    quotas = [n * f for f in fractions]
    # guard against 0.7 * 10 == 7.000000000000001 style drift
    base = [int(math.floor(q + 1e-9)) for q in quotas]
    left = n - sum(base)
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


def _check_fractions(fractions):
    if len(fractions) < 1 or any(f <= 0 for f in fractions):
        raise ArgumentError(f"split fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ArgumentError(f"split fractions must sum to 1, got {sum(fractions)}")


def stratified_split_indices(labels, fractions=DEFAULT_FRACTIONS, rng: Rng = None,
                             warnings=None):
    """Per-class largest-remainder partition; returns one sorted index array per part.

    A class with fewer rows than parts goes entirely to the first part.
    """
    _check_fractions(fractions)
    if rng is None:
        raise ArgumentError("stratified_split needs an Rng")
    labels = np.asarray(labels)
    parts = [[] for _ in fractions]
    for c in np.unique(labels).tolist():
        rows = np.flatnonzero(labels == c)
        rows = rows[rng.permutation(len(rows))]
        if len(rows) < len(fractions):
            message = f"class {c!r} has {len(rows)} rows, fewer than {len(fractions)} parts; all go to train"
            log.warning(message)
            if warnings is not None:
                warnings.append(message)
            parts[0].append(rows)
            continue
        start = 0
        for p, size in enumerate(largest_remainder(len(rows), fractions)):
            parts[p].append(rows[start:start + size])
            start += size
    return [np.sort(np.concatenate(p)) if p else np.zeros(0, dtype=np.int64) for p in parts]


@dataclass
class DatasetSplit:
    train: Split
    val: Split
    test: Split
    feature_names: list
    classes: tuple

    def partition(self, name) -> Split:
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[name]
        except KeyError as exc:
            raise ArgumentError(f"unknown partition {name!r}; use train, val or test") from exc


def stratified_split(X, labels, fractions=DEFAULT_FRACTIONS, rng: Rng = None,
                     feature_names=None, classes=(), warnings=None) -> DatasetSplit:
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    tr, va, te = stratified_split_indices(labels, fractions, rng, warnings)
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    return DatasetSplit(Split(X[tr], labels[tr]), Split(X[va], labels[va]),
                        Split(X[te], labels[te]), names, tuple(classes))
