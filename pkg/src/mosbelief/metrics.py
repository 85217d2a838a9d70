"""Moving-class IoU, precision and recall."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import MovingLabel


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    # NaN marks an undefined ratio (zero denominator)
    @property
    def iou(self) -> float:
        return _ratio(self.tp, self.tp + self.fp + self.fn)

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)


def _ratio(num: int, den: int) -> float:
    return num / den if den else math.nan


def confusion(pred, gt) -> ConfusionCounts:
    """Count moving-class outcomes over points whose ground truth is labeled."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction has {pred.size} points, ground truth {gt.size}")
    valid = gt != MovingLabel.UNLABELED
    p = pred[valid] == MovingLabel.MOVING
    g = gt[valid] == MovingLabel.MOVING
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return ConfusionCounts(tp, fp, fn, int(len(p)) - tp - fp - fn)


def compute_metrics(pred, gt) -> tuple[float, float, float]:
    """``(iou, precision, recall)`` of the moving class; NaN where undefined."""
    c = confusion(pred, gt)
    return c.iou, c.precision, c.recall
