"""Confusion counts, threshold metrics, and ROC / precision-recall areas."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ..errors import ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def confusion(preds, truth):
    preds = np.asarray(preds).astype(np.int64)
    truth = np.asarray(truth).astype(np.int64)
    if preds.shape != truth.shape:
        raise ValidationError(f"{preds.size} predictions vs {truth.size} labels")
    return ConfusionCounts(
        tp=int(np.sum((preds == 1) & (truth == 1))),
        fp=int(np.sum((preds == 1) & (truth == 0))),
        tn=int(np.sum((preds == 0) & (truth == 0))),
        fn=int(np.sum((preds == 0) & (truth == 1))),
    )


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    fpr: float
    undefined: tuple = ()  # names of metrics whose denominator was zero (reported as 0)


def _ratio(num, den, name, undefined):
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def metrics(c):
    if c.total == 0:
        raise ValidationError("metrics need at least one evaluated sample")
    undefined = []
    precision = _ratio(c.tp, c.tp + c.fp, "precision", undefined)
    recall = _ratio(c.tp, c.tp + c.fn, "recall", undefined)
    if precision + recall == 0:
        undefined.append("f1")
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    fpr = _ratio(c.fp, c.fp + c.tn, "fpr", undefined)
    return Metrics((c.tp + c.tn) / c.total, precision, recall, f1, fpr, tuple(undefined))


def _check_scores(scores, truth):
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(np.int64)
    if scores.shape != truth.shape:
        raise ValidationError("scores and labels differ in length")
    if truth.min(initial=1) == truth.max(initial=0) or len(np.unique(truth)) < 2:
        raise ValidationError("ROC/PR areas need both classes present")
    return scores, truth


def roc_auc(scores, truth):
    """Mann-Whitney statistic: P(score of a positive > score of a negative), ties count 1/2."""
    scores, truth = _check_scores(scores, truth)
    ranks = rankdata(scores)
    n_pos = int(truth.sum())
    n_neg = len(truth) - n_pos
    return float((ranks[truth == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def roc_curve(scores, truth):
    """(fpr, tpr, thresholds) at every distinct score, from the top down."""
    scores, truth = _check_scores(scores, truth)
    order = np.argsort(-scores, kind="stable")
    s, t = scores[order], truth[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tps = np.cumsum(t)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / t.sum()]
    fpr = np.r_[0.0, fps / (len(t) - t.sum())]
    return fpr, tpr, np.r_[np.inf, s[last]]


def precision_recall_curve(scores, truth):
    """(precision, recall, thresholds) at every distinct score, recall increasing."""
    scores, truth = _check_scores(scores, truth)
    order = np.argsort(-scores, kind="stable")
    s, t = scores[order], truth[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tps = np.cumsum(t)[last]
    precision = tps / (last + 1)
    recall = tps / t.sum()
    return precision, recall, s[last]


def pr_auc(scores, truth):
    """Step-wise area: each recall increment weighted by the precision reached there."""
    precision, recall, _ = precision_recall_curve(scores, truth)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
