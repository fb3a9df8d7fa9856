from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

CLASSIFIER_IDS = ("nb", "knn", "svm", "gp")


@dataclass(frozen=True)
class BaseClassifierOutput:
    classifier_id: str
    label: int
    probabilities: tuple  # (P(not agitation), P(agitation))


def outputs_from_proba(classifier_id, proba):
    """Wrap an ``(N, 2)`` probability array; hard label is the argmax (ties -> 0)."""
    return [BaseClassifierOutput(classifier_id, int(np.argmax(p)), (float(p[0]), float(p[1]))) for p in proba]


def check_training_set(x, y, need_both=True):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValidationError(f"features {x.shape} and labels {y.shape} do not line up")
    if x.shape[0] == 0:
        raise ValidationError("empty training set")
    if not np.all(np.isfinite(x)):
        raise ValidationError("features must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be 0 or 1")
    if need_both and len(np.unique(y)) < 2:
        raise ValidationError("training set must contain both classes")
    return x, y


def pair(p1):
    """``(N,)`` positive-class probabilities -> ``(N, 2)`` rows summing to one."""
    p1 = np.asarray(p1, dtype=np.float64)
    return np.stack([1.0 - p1, p1], axis=1)
