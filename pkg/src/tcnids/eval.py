"""Confusion matrices, per-class precision/recall/F1, and report rendering.

Per-class metrics are kept as exact fractions until they are aggregated, so
support-weighted recall reproduces accuracy bit-for-bit.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from xml.sax.saxutils import escape

import numpy as np

from .errors import ArgumentError, LabelError

METRICS = ("precision", "recall", "f1")


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # [true, predicted]
    classes: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_matrix(y_true, y_pred, num_classes: int, classes=None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ArgumentError(f"label arrays differ in shape: {y_true.shape} vs {y_pred.shape}")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        bad = np.flatnonzero((arr < 0) | (arr >= num_classes))
        if bad.size:
            i = int(bad[0])
            raise LabelError(f"{name}[{i}] = {arr[i]} is outside [0, {num_classes})", index=i)
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    if classes is None:
        classes = tuple(str(i) for i in range(num_classes))
    if len(classes) != num_classes:
        raise ArgumentError(f"{len(classes)} class names for {num_classes} classes")
    return ConfusionMatrix(counts, tuple(classes))


@dataclass(frozen=True)
class ClassMetrics:
    precision: Fraction
    recall: Fraction
    f1: Fraction
    support: int
    zero_division: tuple = ()


def _ratio(num, den):
    return Fraction(int(num), int(den)) if den else Fraction(0)


def per_class_metrics(cm: ConfusionMatrix):
    c = cm.counts
    tp = np.diag(c)
    predicted = c.sum(axis=0)
    actual = c.sum(axis=1)
    out = []
    for k in range(c.shape[0]):
        flags = tuple(m for m, den in (("precision", predicted[k]), ("recall", actual[k]))
                      if den == 0)
        p = _ratio(tp[k], predicted[k])
        r = _ratio(tp[k], actual[k])
        f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
        out.append(ClassMetrics(p, r, f1, int(actual[k]), flags))
    return out


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    return int(np.trace(cm.counts)) / total if total else 0.0


def aggregate(per_class, supports=None):
    """Macro (unweighted, zero-support classes skipped) and support-weighted means."""
    supports = [m.support for m in per_class] if supports is None else list(supports)
    present = [m for m, s in zip(per_class, supports) if s > 0]
    total = sum(supports)
    macro, weighted = {}, {}
    for name in METRICS:
        macro[name] = (float(sum(getattr(m, name) for m in present) / len(present))
                       if present else 0.0)
        weighted[name] = (float(sum(s * getattr(m, name) for m, s in zip(per_class, supports))
                                / total) if total else 0.0)
    return macro, weighted


@dataclass
class ClassificationReport:
    classes: tuple
    per_class: dict  # class name -> {precision, recall, f1, support}
    accuracy: float
    macro: dict
    weighted: dict
    support: int
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "classes": list(self.classes),
            "per_class": self.per_class,
            "accuracy": self.accuracy,
            "macro_avg": self.macro,
            "weighted_avg": self.weighted,
            "support": self.support,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["classes"]), d["per_class"], d["accuracy"], d["macro_avg"],
                   d["weighted_avg"], d["support"], list(d.get("notes", [])))


def classification_report(cm: ConfusionMatrix, order=None) -> ClassificationReport:
    """Per-class and averaged metrics; ``order`` permutes the class rows."""
    metrics = per_class_metrics(cm)
    macro, weighted = aggregate(metrics)
    notes = []
    per_class = {}
    for name, m in zip(cm.classes, metrics):
        per_class[name] = {"precision": float(m.precision), "recall": float(m.recall),
                           "f1": float(m.f1), "support": m.support}
        for metric in m.zero_division:
            notes.append(f"{name}: {metric} has a zero denominator, reported as 0")
        if m.support == 0:
            notes.append(f"{name}: no support, excluded from macro average")
    classes = cm.classes
    if order is not None:
        if sorted(order) != sorted(classes):
            raise ArgumentError(f"row order {list(order)} is not a permutation of {list(classes)}")
        classes = tuple(order)
        per_class = {name: per_class[name] for name in classes}
    return ClassificationReport(classes, per_class, accuracy(cm), macro, weighted,
                                cm.total, notes)


def _fmt(x):
    return f"{x:.2f}"


def render_report(report: ClassificationReport, fmt: str = "text") -> bytes:
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "precision", "recall", "f1", "support"])
        for name in report.classes:
            m = report.per_class[name]
            w.writerow([name, repr(m["precision"]), repr(m["recall"]), repr(m["f1"]), m["support"]])
        w.writerow(["accuracy", "", "", repr(report.accuracy), report.support])
        for label, agg in (("macro avg", report.macro), ("weighted avg", report.weighted)):
            w.writerow([label, repr(agg["precision"]), repr(agg["recall"]), repr(agg["f1"]),
                        report.support])
        return buf.getvalue().encode()
    if fmt != "text":
        raise ArgumentError(f"unknown report format {fmt!r}")

    width = max([len(c) for c in report.classes] + [len("Weighted avg")]) + 2
    lines = [f"{'':<{width}}{'Precision':>10}{'Recall':>10}{'F1-Score':>10}{'Support':>10}"]
    for name in report.classes:
        m = report.per_class[name]
        lines.append(f"{name:<{width}}{_fmt(m['precision']):>10}{_fmt(m['recall']):>10}"
                     f"{_fmt(m['f1']):>10}{m['support']:>10}")
    lines.append(f"{'Accuracy':<{width}}{'':>10}{'':>10}{_fmt(report.accuracy):>10}"
                 f"{report.support:>10}")
    for label, agg in (("Macro avg", report.macro), ("Weighted avg", report.weighted)):
        lines.append(f"{label:<{width}}{_fmt(agg['precision']):>10}{_fmt(agg['recall']):>10}"
                     f"{_fmt(agg['f1']):>10}{report.support:>10}")
    lines += [f"# {note}" for note in report.notes]
    return ("\n".join(lines) + "\n").encode()


def parse_text_report(text: str):
    """Rows of a text report as ``{label: [values...]}`` (header and notes skipped).

    The label column width is read off the header's leading blanks, so class
    names that look like numbers parse correctly.
    """
    lines = text.splitlines()
    if not lines:
        return {}
    width = len(lines[0]) - len(lines[0].lstrip(" "))
    rows = {}
    for line in lines[1:]:
        if not line.strip() or line.startswith("#"):
            continue
        rows[line[:width].strip()] = line[width:].split()
    return rows


def _cell_color(count, max_count):
    """White for 0 shading to dark blue at ``max_count`` on a log scale."""
    level = math.log1p(count) / math.log1p(max_count) if max_count > 0 else 0.0
    white, dark = (255, 255, 255), (8, 48, 107)
    rgb = tuple(round(w + (d - w) * level) for w, d in zip(white, dark))
    return "#%02x%02x%02x" % rgb, level


def render_confusion(cm: ConfusionMatrix, fmt: str = "csv") -> bytes:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *cm.classes])
        for name, row in zip(cm.classes, cm.counts):
            w.writerow([name, *(int(v) for v in row)])
        return buf.getvalue().encode()
    if fmt != "svg":
        raise ArgumentError(f"unknown confusion format {fmt!r}")

    k = len(cm.classes)
    cell, margin = 48, 170
    size = margin + k * cell + 10
    max_count = int(cm.counts.max()) if cm.counts.size else 0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'font-family="sans-serif" font-size="10">',
        f'<text x="{margin}" y="14">Predicted label (log-scaled colour)</text>',
    ]
    for j, name in enumerate(cm.classes):
        x = margin + j * cell + cell / 2
        parts.append(f'<text x="{x}" y="{margin - 6}" text-anchor="start" '
                     f'transform="rotate(-60 {x} {margin - 6})">{escape(name)}</text>')
    for i, name in enumerate(cm.classes):
        y = margin + i * cell
        parts.append(f'<text x="{margin - 6}" y="{y + cell / 2 + 3}" '
                     f'text-anchor="end">{escape(name)}</text>')
        for j in range(k):
            count = int(cm.counts[i, j])
            color, level = _cell_color(count, max_count)
            text_color = "#ffffff" if level > 0.6 else "#000000"
            x = margin + j * cell
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="{color}" stroke="#cccccc" data-count="{count}"/>')
            parts.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 3}" text-anchor="middle" '
                         f'fill="{text_color}">{count}</text>')
    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode()


def read_confusion_csv(data: bytes):
    rows = list(csv.reader(io.StringIO(data.decode())))
    classes = tuple(rows[0][1:])
    counts = np.array([[int(v) for v in r[1:]] for r in rows[1:]], dtype=np.int64)
    return ConfusionMatrix(counts, classes)


def comparison_table(results) -> str:
    """Side-by-side test accuracy/loss, one row per ``(model_name, accuracy, loss)``."""
    width = max([len(r[0]) for r in results] + [len("Model")]) + 2
    lines = [f"{'Model':<{width}}{'Test Accuracy':>15}{'Test Loss':>12}"]
    for name, acc, loss in results:
        lines.append(f"{name:<{width}}{acc:>15.4f}{loss:>12.4f}")
    return "\n".join(lines) + "\n"
