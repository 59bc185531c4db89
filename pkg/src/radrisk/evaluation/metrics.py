"""ROC AUC, constrained operating thresholds, confusion counts and trial summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from typing import Sequence

import numpy as np

DASH = "---"


class UndefinedMetricError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredExample:
    report_id: str
    patient_id: str
    score: float
    label: bool
    report_date: date | None = None
    split: str = "test"


def _scores_labels(scores, labels=None):
    if labels is None:
        items = list(scores)
        s = np.array([e.score for e in items], dtype=np.float64)
        y = np.array([bool(e.label) for e in items])
    else:
        s = np.asarray(scores, dtype=np.float64).ravel()
        y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    return s, y


def roc_auc(scores, labels=None) -> float:
    """Mann-Whitney AUC: P(positive score > negative score), ties count one half.

    ``scores`` is either an array (with ``labels``) or a list of ScoredExample.
    Computed from midranks, O(n log n).
    """
    s, y = _scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC is undefined unless both classes are present")
    order = np.argsort(s, kind="mergesort")
    s_sorted = s[order]
    # midranks: tied blocks share the mean of their 1-based ranks
    boundaries = np.flatnonzero(np.diff(s_sorted)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [s.size]])
    block_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(s.size)
    ranks[order] = np.repeat(block_rank, ends - starts)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels=None):
    """(fpr, tpr, thresholds) for the rule score >= threshold, thresholds descending."""
    s, y = _scores_labels(scores, labels)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC is undefined unless both classes are present")
    thr = np.unique(s)[::-1]
    tp = np.array([np.sum(y & (s >= t)) for t in thr])
    fp = np.array([np.sum(~y & (s >= t)) for t in thr])
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    return fpr, tpr, np.concatenate([[np.inf], thr])


def _check_target(target: float):
    if not (0.0 < target <= 1.0):
        raise ValueError(f"target rate must lie in (0, 1], got {target}")


def _meets(count: int, total: int, target: float) -> bool:
    return count / total >= target - 1e-12


def threshold_at_specificity(scores, labels=None, target: float = 0.95) -> float:
    """Smallest candidate threshold (observed scores or +inf) with TNR >= target.

    The rule is ``score >= threshold`` -> positive, so a smaller threshold
    flags more examples; the smallest feasible one maximises sensitivity.
    """
    _check_target(target)
    s, y = _scores_labels(scores, labels)
    neg = np.sort(s[~y])
    if neg.size == 0:
        raise UndefinedMetricError("specificity needs negative examples")
    for t in np.concatenate([np.unique(s), [np.inf]]):
        tn = int(np.searchsorted(neg, t, side="left"))
        if _meets(tn, neg.size, target):
            return float(t)
    return math.inf


def threshold_at_sensitivity(scores, labels=None, target: float = 0.95) -> float:
    """Largest observed score usable as threshold with TPR >= target."""
    _check_target(target)
    s, y = _scores_labels(scores, labels)
    pos = np.sort(s[y])
    if pos.size == 0:
        raise UndefinedMetricError("sensitivity needs positive examples")
    for t in np.unique(s)[::-1]:
        tp = pos.size - int(np.searchsorted(pos, t, side="left"))
        if _meets(tp, pos.size, target):
            return float(t)
    return float(pos[0])


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float | None:
        return (self.tp + self.tn) / self.total if self.total else None

    @property
    def sensitivity(self) -> float | None:
        d = self.tp + self.fn
        return self.tp / d if d else None

    @property
    def specificity(self) -> float | None:
        d = self.tn + self.fp
        return self.tn / d if d else None

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


def confusion(scores, labels=None, threshold: float = 0.5) -> ConfusionCounts:
    s, y = _scores_labels(scores, labels)
    pred = s >= threshold
    return ConfusionCounts(int(np.sum(pred & y)), int(np.sum(pred & ~y)),
                           int(np.sum(~pred & ~y)), int(np.sum(~pred & y)))


@dataclass(frozen=True)
class TrialSummary:
    metric: str
    values: tuple[float, ...]
    mean: float
    std: float

    def formatted(self, digits: int = 3) -> str:
        return f"{self.mean:.{digits}f} ± {self.std:.{digits}f}"


def trial_summary(values: Sequence[float], metric: str = "") -> TrialSummary:
    vals = [float(v) for v in values]
    if len(vals) < 2:
        raise UndefinedMetricError("standard deviation needs at least two trials")
    arr = np.asarray(vals)
    return TrialSummary(metric, tuple(vals), float(arr.mean()), float(arr.std(ddof=1)))


def format_rate(value: float | None, digits: int = 3) -> str:
    return DASH if value is None or not np.isfinite(value) else f"{value:.{digits}f}"
