"""Confusion matrix and precision/recall/F1 reporting for the HOF/NOT task."""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

__all__ = [
    "CLASS_NAMES",
    "confusion",
    "confusion_to_tsv",
    "ClassMetrics",
    "EvalReport",
    "report",
    "format_report",
    "report_to_json",
    "macro_f1",
    "round2",
]

# Row/column order of the confusion matrix: rows are actual classes,
# columns predicted, both in HOF, NOT order.
CLASS_NAMES = ("HOF", "NOT")
_LABEL_TO_ROW = {1: 0, 0: 1}  # label id (HOF=1) -> matrix index


def confusion(preds: Sequence[int], labels: Sequence[int]) -> np.ndarray:
    """Tally a 2x2 confusion matrix (rows actual, columns predicted)."""
    if len(preds) != len(labels):
        raise ValueError(f"length mismatch: {len(preds)} preds vs {len(labels)} labels")
    if len(preds) == 0:
        raise ValueError("cannot build a confusion matrix from zero examples")
    cm = np.zeros((2, 2), dtype=np.int64)
    for p, y in zip(preds, labels):
        cm[_LABEL_TO_ROW[int(y)], _LABEL_TO_ROW[int(p)]] += 1
    return cm


def confusion_to_tsv(cm: np.ndarray) -> str:
    """TSV rendering: header row of predicted classes, one row per actual class."""
    cm = np.asarray(cm)
    lines = ["actual\\predicted\t" + "\t".join(CLASS_NAMES)]
    for i, name in enumerate(CLASS_NAMES):
        lines.append(name + "\t" + "\t".join(str(int(x)) for x in cm[i]))
    return "\n".join(lines)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    per_class: dict  # class name -> ClassMetrics
    macro_avg: ClassMetrics
    weighted_avg: ClassMetrics
    accuracy: float
    zero_division_hit: bool  # True if any 0/0 was mapped to 0 by convention


def _safe_div(num: float, den: float) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def report(cm: np.ndarray) -> EvalReport:
    """Per-class, macro-average, and weighted-average metrics from a confusion matrix.

    Zero denominators yield 0.0 and set the ``zero_division_hit`` flag.
    Macro F1 is the unweighted mean of per-class F1 scores.
    """
    cm = np.asarray(cm)
    if cm.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {cm.shape}")
    total = int(cm.sum())
    if total < 1:
        raise ValueError("confusion matrix is empty")

    per_class = {}
    zero_hit = False
    for i, name in enumerate(CLASS_NAMES):
        tp = int(cm[i, i])
        support = int(cm[i, :].sum())
        predicted = int(cm[:, i].sum())
        precision, z1 = _safe_div(tp, predicted)
        recall, z2 = _safe_div(tp, support)
        f1, z3 = _safe_div(2 * precision * recall, precision + recall)
        zero_hit = zero_hit or z1 or z2 or z3
        per_class[name] = ClassMetrics(precision, recall, f1, support)

    ms = [per_class[name] for name in CLASS_NAMES]
    macro = ClassMetrics(
        sum(m.precision for m in ms) / len(ms),
        sum(m.recall for m in ms) / len(ms),
        sum(m.f1 for m in ms) / len(ms),
        total,
    )
    weighted = ClassMetrics(
        sum(m.precision * m.support for m in ms) / total,
        sum(m.recall * m.support for m in ms) / total,
        sum(m.f1 * m.support for m in ms) / total,
        total,
    )
    accuracy = float(np.trace(cm)) / total
    return EvalReport(per_class, macro, weighted, accuracy, zero_hit)


def round2(x: float) -> float:
    """Round half-up to 2 decimals (display convention; internals keep full precision)."""
    return float(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_report(r: EvalReport) -> str:
    """Fixed-width table: per-class rows, then accuracy, macro avg, weighted avg."""
    header = f"{'':<14}{'Precision':>10}{'Recall':>10}{'F1-score':>10}{'Support':>10}"
    lines = [header]
    for name in CLASS_NAMES:
        m = r.per_class[name]
        lines.append(
            f"{name:<14}{round2(m.precision):>10.2f}{round2(m.recall):>10.2f}"
            f"{round2(m.f1):>10.2f}{m.support:>10d}"
        )
    lines.append(
        f"{'Accuracy':<14}{'':>10}{'':>10}{round2(r.accuracy):>10.2f}"
        f"{r.macro_avg.support:>10d}"
    )
    for label, m in (("Macro avg", r.macro_avg), ("Weighted avg", r.weighted_avg)):
        lines.append(
            f"{label:<14}{round2(m.precision):>10.2f}{round2(m.recall):>10.2f}"
            f"{round2(m.f1):>10.2f}{m.support:>10d}"
        )
    return "\n".join(lines)


def report_to_json(r: EvalReport) -> str:
    def as_dict(m: ClassMetrics) -> dict:
        return {
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
            "support": m.support,
        }

    payload = {
        "per_class": {name: as_dict(m) for name, m in r.per_class.items()},
        "macro_avg": as_dict(r.macro_avg),
        "weighted_avg": as_dict(r.weighted_avg),
        "accuracy": r.accuracy,
    }
    return json.dumps(payload, sort_keys=True)


def macro_f1(preds: Sequence[int], labels: Sequence[int]) -> float:
    """Convenience scorer used by training loops and cross-validation."""
    return report(confusion(preds, labels)).macro_avg.f1
