"""Confusion matrices and classification metrics, applied identically to
supervised predictions and parsed zero-shot outcomes.

Conventions: unparseable predictions stay in the accuracy denominator and in
per-class support (so every method is scored over the same test set); a class
with an empty precision or recall denominator scores 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import UNPARSEABLE
from .errors import (
    EmptyMatrix,
    InconsistentClassLists,
    LengthMismatch,
    UnknownTrueLabel,
)


@dataclass
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray  # (K, K) int64, rows = true class, columns = predicted
    unparseable_by_class: np.ndarray  # (K,) int64, per true class

    @property
    def unparseable_count(self) -> int:
        return int(self.unparseable_by_class.sum())

    @property
    def parsed_total(self) -> int:
        return int(self.counts.sum())

    @property
    def total(self) -> int:
        return self.parsed_total + self.unparseable_count


def confusion(y_true: Sequence, y_pred: Sequence, classes: Sequence) -> ConfusionMatrix:
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} true labels vs {len(y_pred)} predictions")
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    unparseable = np.zeros(len(classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if t not in index:
            raise UnknownTrueLabel(f"true label {t!r} not in class list {classes}")
        if p == UNPARSEABLE:
            unparseable[index[t]] += 1
        elif p in index:
            counts[index[t], index[p]] += 1
        else:
            raise ValueError(f"predicted label {p!r} not in class list {classes}")
    return ConfusionMatrix(classes=classes, counts=counts, unparseable_by_class=unparseable)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class AverageMetrics:
    precision: float
    recall: float
    f1: float


@dataclass
class MetricsReport:
    accuracy: float
    per_class: dict
    macro_f1: float
    weighted: AverageMetrics
    confusion: ConfusionMatrix

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": {
                str(c): {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for c, m in self.per_class.items()
            },
            "macro_f1": self.macro_f1,
            "weighted": {
                "precision": self.weighted.precision,
                "recall": self.weighted.recall,
                "f1": self.weighted.f1,
            },
            "confusion": {
                "classes": [str(c) for c in self.confusion.classes],
                "counts": self.confusion.counts.tolist(),
                "unparseable_by_class": self.confusion.unparseable_by_class.tolist(),
                "unparseable_count": self.confusion.unparseable_count,
            },
        }


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy, per-class precision/recall/F1 with support, macro F1, and
    support-weighted averages. Accuracy = trace / total examples, with
    unparseable predictions in the denominator only."""
    total = cm.total
    if total < 1:
        raise EmptyMatrix("metrics over an empty confusion matrix")
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    support = counts.sum(axis=1) + cm.unparseable_by_class

    per_class = {}
    for i, cls in enumerate(cm.classes):
        precision = _safe_div(tp[i], predicted[i])
        recall = _safe_div(tp[i], support[i])
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class[cls] = ClassMetrics(
            precision=precision, recall=recall, f1=f1, support=int(support[i])
        )

    accuracy = float(tp.sum()) / total
    macro_f1 = float(np.mean([m.f1 for m in per_class.values()]))
    weights = support / support.sum() if support.sum() > 0 else support
    weighted = AverageMetrics(
        precision=float(sum(w * per_class[c].precision for w, c in zip(weights, cm.classes))),
        recall=float(sum(w * per_class[c].recall for w, c in zip(weights, cm.classes))),
        f1=float(sum(w * per_class[c].f1 for w, c in zip(weights, cm.classes))),
    )
    return MetricsReport(
        accuracy=accuracy,
        per_class=per_class,
        macro_f1=macro_f1,
        weighted=weighted,
        confusion=cm,
    )


def normalize_confusion(cm: ConfusionMatrix) -> np.ndarray:
    """Cells divided by the grand total of parsed counts; the result sums to 1."""
    total = cm.parsed_total
    if total < 1:
        raise EmptyMatrix("cannot normalize a confusion matrix with no parsed predictions")
    return cm.counts.astype(np.float64) / total


@dataclass
class F1Table:
    classes: tuple
    rows: tuple  # ((model_name, (f1 per class, ...)), ...)

    def as_rows(self) -> list[list]:
        out = [["model", *(str(c) for c in self.classes)]]
        for name, values in self.rows:
            out.append([name, *values])
        return out


def report_from_dict(doc: Mapping) -> MetricsReport:
    """Rebuild a report from the machine-readable block of metrics.json.

    Classes come back as strings (JSON keys); ranking and tabulation do not
    depend on the original label type.
    """
    conf = doc["confusion"]
    cm = ConfusionMatrix(
        classes=tuple(conf["classes"]),
        counts=np.asarray(conf["counts"], dtype=np.int64),
        unparseable_by_class=np.asarray(conf["unparseable_by_class"], dtype=np.int64),
    )
    per_class = {
        c: ClassMetrics(
            precision=m["precision"], recall=m["recall"], f1=m["f1"], support=m["support"]
        )
        for c, m in doc["per_class"].items()
    }
    weighted = AverageMetrics(**doc["weighted"])
    return MetricsReport(
        accuracy=doc["accuracy"],
        per_class=per_class,
        macro_f1=doc["macro_f1"],
        weighted=weighted,
        confusion=cm,
    )


def per_class_f1_table(reports: Mapping[str, MetricsReport]) -> F1Table:
    """Rows = models, columns = classes, cells = F1; a class a model never
    predicted contributes its 0 score, not a gap."""
    if not reports:
        raise ValueError("no reports to tabulate")
    names = list(reports)
    classes = reports[names[0]].confusion.classes
    for name in names[1:]:
        if reports[name].confusion.classes != classes:
            raise InconsistentClassLists(
                f"report {name!r} has classes {reports[name].confusion.classes}, "
                f"expected {classes}"
            )
    rows = tuple(
        (name, tuple(reports[name].per_class[c].f1 for c in classes)) for name in names
    )
    return F1Table(classes=classes, rows=rows)
