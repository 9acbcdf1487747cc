"""Synthetic stand-in for the Edge-IIoTset table, for desk-scale runs."""
from __future__ import annotations

import csv

import numpy as np

from ..errors import ArgumentError
from ..numerics import Rng
from .table import CATEGORICAL, LABEL_COLUMN, NUMERIC, RawTable

# label vocabulary and full-dataset class counts of DNN-EdgeIIoT
CLASS_COUNTS = {
    "Normal": 349906,
    "DDoS_UDP": 30392,
    "DDoS_ICMP": 16985,
    "SQL_injection": 12706,
    "DDoS_TCP": 12515,
    "Vulnerability_scanner": 12507,
    "Password": 12483,
    "DDoS_HTTP": 12136,
    "Uploading": 9239,
    "Backdoor": 6007,
    "Port_Scanning": 4994,
    "XSS": 3767,
    "Ransomware": 2422,
    "Fingerprinting": 213,
    "MITM": 90,
}
CLASS_NAMES = tuple(CLASS_COUNTS)
# row order of the customary per-class report for this dataset
REPORT_ORDER = (
    "Normal", "MITM", "Uploading", "Ransomware", "SQL_injection", "DDoS_HTTP", "DDoS_TCP",
    "Password", "Port_Scanning", "Vulnerability_scanner", "Backdoor", "XSS", "Fingerprinting",
    "DDoS_UDP", "DDoS_ICMP",
)
CATEGORIES_PER_FEATURE = 6


def class_index(names) -> dict:
    return {name: i for i, name in enumerate(names)}


def generate_fixture(classes: int = 15, per_class: int = 300, numeric_features: int = 32,
                     categorical_features: int = 4, separation: float = 4.0, rng: Rng = None):
    """Returns ``(table, labels)`` with integer labels into ``CLASS_NAMES``.

    Numeric features are unit-variance Gaussians around ``separation`` times a
    random unit vector per class, shifted so every value is non-negative.
    Each categorical feature prefers one class-specific category with
    probability ``0.5 * (1 - exp(-separation))`` and is uniform otherwise, so
    ``separation=0`` makes every class identically distributed.
    """
    if per_class < 1:
        raise ArgumentError(f"per_class must be >= 1, got {per_class}")
    if not 1 <= classes <= len(CLASS_NAMES):
        raise ArgumentError(f"classes must be in [1, {len(CLASS_NAMES)}], got {classes}")
    if numeric_features < 0 or categorical_features < 0 or numeric_features + categorical_features < 1:
        raise ArgumentError("need at least one feature")
    if separation < 0:
        raise ArgumentError(f"separation must be >= 0, got {separation}")
    rng = rng or Rng(0)
    n = classes * per_class
    labels = np.repeat(np.arange(classes), per_class)

    directions = rng.normal(size=(classes, numeric_features))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    centres = separation * directions / np.where(norms == 0, 1.0, norms)
    numeric = centres[labels] + rng.normal(size=(n, numeric_features))
    if numeric_features:
        numeric -= numeric.min(axis=0)

    prefer = 0.5 * (1.0 - np.exp(-separation))
    preferred = rng.generator.integers(0, CATEGORIES_PER_FEATURE, size=(classes, categorical_features))
    uniform = rng.generator.integers(0, CATEGORIES_PER_FEATURE, size=(n, categorical_features))
    use_pref = rng.random((n, categorical_features)) < prefer
    codes = np.where(use_pref, preferred[labels], uniform)

    order = rng.permutation(n)
    labels = labels[order]
    columns, kinds = {}, {}
    for j in range(numeric_features):
        columns[f"num_{j}"] = numeric[order, j]
        kinds[f"num_{j}"] = NUMERIC
    for j in range(categorical_features):
        columns[f"cat_{j}"] = np.array([f"c{j}v{v}" for v in codes[order, j]], dtype=object)
        kinds[f"cat_{j}"] = CATEGORICAL
    return RawTable(columns, kinds), labels


def write_fixture_csv(path, table: RawTable, labels, label_column=LABEL_COLUMN):
    """CSV with the feature columns plus the class-name label column."""
    names = table.names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + [label_column])
        cols = [table.columns[k] for k in names]
        for i, label in enumerate(labels):
            row = [repr(float(c[i])) if table.kinds[k] == NUMERIC else c[i]
                   for k, c in zip(names, cols)]
            w.writerow(row + [CLASS_NAMES[int(label)]])
