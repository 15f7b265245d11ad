"""Multi-class confusion matrix and per-class classification report.

For class c, one-vs-rest over the matrix (rows = true, cols = predicted):

    TP = M[c,c]   FP = Σ_t M[t,c] − TP   FN = Σ_p M[c,p] − TP   TN = rest
    precision = TP/(TP+FP)   recall = TP/(TP+FN)   F1 = 2·P·R/(P+R)

Counts and per-class rates come from :mod:`sklearn.metrics`. Accuracy is
trace/total. Weighted averages weight each class by its support; weighted
recall is taken as trace/total, which is the same quantity, so it equals
accuracy exactly.

A zero denominator yields 0.0 and a note on the class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix, precision_recall_fscore_support

from lstm_ids.exceptions import DataError, ShapeError

NO_PREDICTED = "no predicted samples"
NO_ACTUAL = "no actual samples"


@dataclass(eq=False)
class ConfusionMatrix:
    counts: np.ndarray                  # k × k int64
    class_names: Tuple[str, ...]

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    def one_vs_rest(self, c: int) -> Tuple[int, int, int, int]:
        """(TP, FP, FN, TN) for class ``c``."""
        tp = int(self.counts[c, c])
        fp = int(self.counts[:, c].sum()) - tp
        fn = int(self.counts[c, :].sum()) - tp
        return tp, fp, fn, self.total - tp - fp - fn

    def support(self, c: int) -> int:
        return int(self.counts[c, :].sum())


def _labels(values, name: str) -> np.ndarray:
    array = np.asarray(values)
    if array.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {array.shape}")
    if array.size and not np.issubdtype(array.dtype, np.integer):
        if not np.all(np.equal(np.mod(array, 1), 0)):
            raise DataError(f"{name} must be integer class indices")
    return array.astype(np.int64)


def confusion(true_labels, predicted_labels, k: int,
              class_names: Optional[Sequence[str]] = None) -> ConfusionMatrix:
    true = _labels(true_labels, "true labels")
    pred = _labels(predicted_labels, "predicted labels")
    if true.shape != pred.shape:
        raise ShapeError(
            f"{true.shape[0]} true labels but {pred.shape[0]} predicted labels")
    for name, values in (("true", true), ("predicted", pred)):
        bad = (values < 0) | (values >= k)
        if bad.any():
            raise DataError(
                f"{name} label {int(values[bad][0])} is outside [0, {k})")
    if true.size:
        counts = confusion_matrix(true, pred, labels=np.arange(k)).astype(np.int64)
    else:
        counts = np.zeros((k, k), dtype=np.int64)
    names = tuple(class_names) if class_names is not None else tuple(
        str(c) for c in range(k))
    if len(names) != k:
        raise ShapeError(f"{len(names)} class names for {k} classes")
    return ConfusionMatrix(counts, names)


def accuracy(true_labels, predicted_labels) -> float:
    """Fraction of matching labels; the one accuracy used everywhere."""
    true = np.asarray(true_labels)
    pred = np.asarray(predicted_labels)
    if true.shape != pred.shape:
        raise ShapeError(
            f"{true.shape[0]} true labels but {pred.shape[0]} predicted labels")
    if true.size == 0:
        raise DataError("Cannot score an empty label set")
    return float(accuracy_score(true, pred))


@dataclass(frozen=True)
class ClassMetrics:
    name: str
    precision: float
    recall: float
    f1: float
    support: int
    notes: Tuple[str, ...] = ()


@dataclass(frozen=True)
class ClassificationReport:
    classes: Tuple[ClassMetrics, ...]
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    total: int
    extras: dict = field(default_factory=dict, compare=False)   # table-only, not serialized

    def by_name(self, name: str) -> ClassMetrics:
        for metrics in self.classes:
            if metrics.name == name:
                return metrics
        raise KeyError(name)

    def to_dict(self) -> dict:
        data = {
            "classes": [
                {"class": m.name, "precision": m.precision, "recall": m.recall,
                 "f1": m.f1, "support": m.support, "notes": list(m.notes)}
                for m in self.classes
            ],
            "accuracy": self.accuracy,
            "weighted_avg": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
            "total": self.total,
        }
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ClassificationReport":
        try:
            weighted = data["weighted_avg"]
            return cls(
                classes=tuple(
                    ClassMetrics(c["class"], float(c["precision"]), float(c["recall"]),
                                 float(c["f1"]), int(c["support"]),
                                 tuple(c.get("notes", ())))
                    for c in data["classes"]),
                accuracy=float(data["accuracy"]),
                weighted_precision=float(weighted["precision"]),
                weighted_recall=float(weighted["recall"]),
                weighted_f1=float(weighted["f1"]),
                total=int(data["total"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"Malformed classification report: {e}") from e


def _label_pairs(cm: ConfusionMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """(true, predicted) label vectors that reproduce ``cm``."""
    rows, cols = np.indices(cm.counts.shape)
    repeats = cm.counts.ravel()
    return np.repeat(rows.ravel(), repeats), np.repeat(cols.ravel(), repeats)


def report(cm: ConfusionMatrix) -> ClassificationReport:
    total = cm.total
    if total == 0:
        raise DataError("Cannot report on an empty confusion matrix")
    labels = np.arange(cm.k)
    true, pred = _label_pairs(cm)
    precision, recall, f1, support = precision_recall_fscore_support(
        true, pred, labels=labels, average=None, zero_division=0)
    predicted = cm.counts.sum(axis=0)
    rows: List[ClassMetrics] = []
    for c, name in enumerate(cm.class_names):
        notes = []
        if predicted[c] == 0:
            notes.append(NO_PREDICTED)
        if support[c] == 0:
            notes.append(NO_ACTUAL)
        rows.append(ClassMetrics(name, float(precision[c]), float(recall[c]), float(f1[c]),
                                 int(support[c]), tuple(notes)))
    return ClassificationReport(
        classes=tuple(rows),
        accuracy=cm.correct / total,
        weighted_precision=float(np.average(precision, weights=support)),
        weighted_recall=cm.correct / total,
        weighted_f1=float(np.average(f1, weights=support)),
        total=total,
    )
