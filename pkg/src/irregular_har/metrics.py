"""Confusion matrices, macro F1 and relative performance loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``counts[true, predicted]`` for ``K`` classes."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_matrix(predictions, truths, num_classes: int) -> ConfusionMatrix:
    pred = np.asarray(predictions, dtype=np.int64).ravel()
    true = np.asarray(truths, dtype=np.int64).ravel()
    if pred.shape != true.shape:
        raise ValueError(f"{pred.size} predictions vs {true.size} truths")
    for name, arr in (("prediction", pred), ("truth", true)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValueError(f"{name} class id outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    return ConfusionMatrix(counts)


def per_class_f1(cm: ConfusionMatrix) -> np.ndarray:
    """``2TP / (2TP + FP + FN)`` per class, 0 where the denominator is 0."""
    c = cm.counts.astype(np.float64)
    tp = np.diag(c)
    fp = c.sum(axis=0) - tp
    fn = c.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    out = np.zeros_like(tp)
    np.divide(2 * tp, denom, out=out, where=denom > 0)
    return out


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1; absent classes count as 0."""
    return float(per_class_f1(cm).mean())


def performance_loss(p_regular: float, p_irregular: float) -> float:
    """Relative drop ``(P_regular - P_irregular) / P_regular`` (signed)."""
    if p_regular == 0:
        raise ZeroDivisionError("performance loss undefined for P_regular = 0")
    return (p_regular - p_irregular) / p_regular
