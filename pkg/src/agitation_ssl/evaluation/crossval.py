"""k-fold cross-validation and hold-out evaluation around a model factory.

A factory is any callable ``factory(seed) -> model`` where the model has
``fit(counts, labels)`` and ``scores(counts) -> (N,)`` agitation
probabilities, plus a ``threshold`` attribute. Counts are raw ``(N, 24, 8)``
daily activity grids.
"""

from dataclasses import dataclass, field

import numpy as np

from ..data.split import kfold_split
from ..errors import ValidationError
from ..rng import derive_seed
from .metrics import confusion, metrics, pr_auc, roc_auc

METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "roc_auc", "pr_auc")
COHORT_TAGS = ("positive-cohort", "negative-cohort", "unlabelled")


def score_metrics(scores, truth, threshold):
    """All six reported metrics plus the names of those that were undefined (reported as 0)."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(np.int64)
    m = metrics(confusion(scores > threshold, truth))
    values = {"accuracy": m.accuracy, "precision": m.precision, "recall": m.recall, "f1": m.f1}
    undefined = list(m.undefined)
    if len(np.unique(truth)) == 2:
        values["roc_auc"] = roc_auc(scores, truth)
        values["pr_auc"] = pr_auc(scores, truth)
    else:
        values["roc_auc"] = values["pr_auc"] = 0.0
        undefined += ["roc_auc", "pr_auc"]
    return values, [u for u in undefined if u != "fpr"]


@dataclass
class EvaluationReport:
    model_id: str
    seed: int
    config_hash: str
    folds: list                 # per-fold metric dicts
    undefined: list             # per-fold lists of metric names reported as 0
    scores: np.ndarray          # out-of-fold agitation probabilities, in sample order
    truth: np.ndarray
    fold_of: np.ndarray         # test fold index of each sample
    extra: dict = field(default_factory=dict)

    @property
    def mean(self):
        return {k: float(np.mean([f[k] for f in self.folds])) for k in METRIC_NAMES}

    def to_dict(self):
        return {
            "model_id": self.model_id,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "mean": self.mean,
            "folds": [{k: float(f[k]) for k in METRIC_NAMES} for f in self.folds],
            "undefined": [list(u) for u in self.undefined],
            **self.extra,
        }


def check_folds(folds, n):
    """Every sample lands in exactly one test fold."""
    seen = np.concatenate(folds) if folds else np.array([], dtype=np.int64)
    if len(seen) != n or not np.array_equal(np.sort(seen), np.arange(n)):
        raise ValidationError("folds do not partition the labelled samples")


def cross_validate(factory, counts, labels, k=10, seed=0, model_id="model", config_hash=""):
    counts = np.asarray(counts, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    n = len(labels)
    if k > n:
        raise ValidationError(f"k={k} folds but only {n} labelled samples")
    folds = kfold_split(n, k, seed, labels=labels, stratified=True)
    check_folds(folds, n)
    for i, test in enumerate(folds):
        train = np.setdiff1d(np.arange(n), test)
        if len(np.unique(labels[train])) < 2:
            raise ValidationError(f"fold {i}: training split holds a single class; stratification infeasible")
    scores = np.zeros(n)
    fold_of = np.zeros(n, dtype=np.int64)
    per_fold, undefined = [], []
    threshold = None
    for i, test in enumerate(folds):
        train = np.setdiff1d(np.arange(n), test)
        model = factory(derive_seed(seed, "fold", i))
        model.fit(counts[train], labels[train])
        s = np.asarray(model.scores(counts[test]), dtype=np.float64)
        threshold = model.threshold
        values, flags = score_metrics(s, labels[test], threshold)
        per_fold.append(values)
        undefined.append(flags)
        scores[test] = s
        fold_of[test] = i
    return EvaluationReport(model_id, int(seed), config_hash, per_fold, undefined, scores, labels, fold_of,
                            extra={"k": k, "threshold": float(threshold)})


def cohort_tags(home_ids, labels):
    """positive-cohort if any labelled positive day, negative-cohort if labelled days are all
    negative, otherwise unlabelled. ``labels`` uses 0/1 and 255 for unlabelled days."""
    tags = {}
    for home in sorted(set(home_ids)):
        lab = np.asarray([l for h, l in zip(home_ids, labels) if h == home])
        lab = lab[lab != 255]
        tags[home] = "unlabelled" if lab.size == 0 else ("positive-cohort" if np.any(lab == 1) else "negative-cohort")
    return tags


@dataclass
class AlertRateReport:
    homes: list  # dicts: home_id, days, alerts, rate, tag

    @property
    def total_days(self):
        return sum(h["days"] for h in self.homes)

    @property
    def total_alerts(self):
        return sum(h["alerts"] for h in self.homes)

    def to_dict(self):
        return {"homes": self.homes, "total_days": self.total_days, "total_alerts": self.total_alerts,
                "overall_rate": self.total_alerts / self.total_days if self.total_days else 0.0}


def alert_rate_report(home_ids, alerts, tags):
    """Tally a prediction stream of (home, alert) pairs; the order of the stream is irrelevant."""
    alerts = np.asarray(alerts).astype(bool)
    home_ids = np.asarray(home_ids)
    if len(home_ids) != len(alerts):
        raise ValidationError("home ids and alerts differ in length")
    rows = []
    for home in sorted(set(home_ids.tolist())):
        mask = home_ids == home
        days, raised = int(mask.sum()), int(alerts[mask].sum())
        rows.append({"home_id": home, "days": days, "alerts": raised, "rate": raised / days,
                     "tag": tags.get(home, "unlabelled")})
    return AlertRateReport(rows)


def check_disjoint(train_homes, holdout_homes):
    overlap = sorted(set(train_homes) & set(holdout_homes))
    if overlap:
        raise ValidationError(f"hold-out cohort shares homes with training data: {', '.join(overlap)}")


def holdout_evaluate(model, train_homes, matrices, model_id="model", seed=0, config_hash="", threshold=None):
    """Score every hold-out day; metrics use the labelled days, alert rates use all days.

    ``matrices`` is a sequence of DailyActivityMatrix.
    """
    home_ids = [m.home_id for m in matrices]
    check_disjoint(train_homes, home_ids)
    if not matrices:
        raise ValidationError("empty hold-out cohort")
    counts = np.stack([m.counts for m in matrices])
    labels = np.array([int(m.label) for m in matrices])
    t = model.threshold if threshold is None else threshold
    scores = np.asarray(model.scores(counts), dtype=np.float64)
    alerts = scores > t
    labelled = labels != 255
    if labelled.any():
        values, flags = score_metrics(scores[labelled], labels[labelled], t)
    else:
        values, flags = {k: 0.0 for k in METRIC_NAMES}, list(METRIC_NAMES)
    report = EvaluationReport(model_id, int(seed), config_hash, [values], [flags], scores[labelled],
                              labels[labelled], np.zeros(int(labelled.sum()), dtype=np.int64),
                              extra={"threshold": float(t), "labelled_days": int(labelled.sum())})
    return report, alert_rate_report(home_ids, alerts, cohort_tags(home_ids, labels))
