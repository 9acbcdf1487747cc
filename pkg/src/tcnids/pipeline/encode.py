"""One-hot encoding of categorical columns with a shared rare bucket."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError
from .table import CATEGORICAL, RawTable


@dataclass
class EncodedMatrix:
    X: np.ndarray
    feature_names: list


@dataclass
class EncodingMap:
    """Per categorical column: the kept categories in indicator order.

    Indicator ``{col}_{k}`` marks ``categories[col][k]``; ``{col}_rare`` marks
    every other value, including values first seen at apply time.
    """

    categories: dict
    max_categories: int

    def feature_names(self, column):
        return [f"{column}_{k}" for k in range(len(self.categories[column]))] + [f"{column}_rare"]

    def to_dict(self):
        return {"max_categories": self.max_categories, "categories": self.categories}

    @classmethod
    def from_dict(cls, d):
        return cls({k: list(v) for k, v in d["categories"].items()}, d["max_categories"])


def fit_encoding(table: RawTable, max_categories: int = 24, exclude=()) -> EncodingMap:
    if max_categories < 2:
        raise ArgumentError(f"max_categories must be >= 2, got {max_categories}")
    categories = {}
    for name in table.names:
        if table.kinds[name] != CATEGORICAL or name in exclude:
            continue
        counts = Counter(table.columns[name].tolist())
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        categories[name] = [value for value, _ in ranked[:max_categories]]
    return EncodingMap(categories, max_categories)


def apply_encoding(table: RawTable, encoding: EncodingMap, exclude=()) -> EncodedMatrix:
    """Numeric columns pass through; encoded columns expand in place."""
    blocks, names = [], []
    for name in table.names:
        if name in exclude:
            continue
        values = table.columns[name]
        if name in encoding.categories:
            cats = encoding.categories[name]
            index = {c: k for k, c in enumerate(cats)}
            codes = np.fromiter((index.get(v, len(cats)) for v in values.tolist()),
                                dtype=np.int64, count=len(values))
            block = np.zeros((len(values), len(cats) + 1))
            block[np.arange(len(values)), codes] = 1.0
            blocks.append(block)
            names += encoding.feature_names(name)
        elif table.kinds[name] == CATEGORICAL:
            raise ArgumentError(f"categorical column {name!r} has no fitted encoding")
        else:
            blocks.append(np.asarray(values, dtype=np.float64)[:, None])
            names.append(name)
    X = np.hstack(blocks) if blocks else np.zeros((table.n_rows, 0))
    return EncodedMatrix(np.ascontiguousarray(X), names)


def encode_categoricals(table: RawTable, max_categories: int = 24, exclude=()):
    """Fit and apply in one go. Returns ``(EncodedMatrix, EncodingMap)``."""
    encoding = fit_encoding(table, max_categories, exclude)
    return apply_encoding(table, encoding, exclude), encoding
