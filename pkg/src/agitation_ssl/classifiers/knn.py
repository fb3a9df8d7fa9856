from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .base import check_training_set, outputs_from_proba


@dataclass(frozen=True)
class KNN:
    """Stored training set; serialized as ``x`` (N, D), ``y`` (N,), ``k`` (scalar)."""

    x: np.ndarray
    y: np.ndarray
    k: int

    def neighbours(self, queries):
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        d2 = ((queries[:, None, :] - self.x[None]) ** 2).sum(axis=2)
        # stable sort: equal distances keep the lower training index first
        return np.argsort(d2, axis=1, kind="stable")[:, :self.k]

    def predict_proba(self, queries):
        votes = self.y[self.neighbours(queries)]
        p1 = votes.mean(axis=1)
        return np.stack([1.0 - p1, p1], axis=1)

    def predict(self, queries):
        return outputs_from_proba("knn", self.predict_proba(queries))

    def state(self):
        return {"x": self.x, "y": self.y.astype(np.float64), "k": np.array(float(self.k))}

    @classmethod
    def from_state(cls, arrays):
        return cls(arrays["x"], arrays["y"].astype(np.int64), int(arrays["k"]))


def train_knn(x, y, k=5):
    x, y = check_training_set(x, y, need_both=False)
    if not 1 <= k <= x.shape[0]:
        raise ValidationError(f"k={k} must lie in [1, {x.shape[0]}]")
    return KNN(x.copy(), y.copy(), int(k))


def predict_knn(model, x):
    return model.predict(x)
