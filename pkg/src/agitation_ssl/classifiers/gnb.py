from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .base import check_training_set, outputs_from_proba

VAR_FLOOR = 1e-9


@dataclass(frozen=True)
class GaussianNB:
    """Per-class feature means/variances and class priors.

    Serialized fields: ``means`` (2, D), ``variances`` (2, D), ``priors`` (2,).
    """

    means: np.ndarray
    variances: np.ndarray
    priors: np.ndarray

    def log_joint(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        ll = -0.5 * (np.log(2 * np.pi * self.variances)[None]
                     + (x[:, None, :] - self.means[None]) ** 2 / self.variances[None]).sum(axis=2)
        return ll + np.log(self.priors)[None]

    def predict_proba(self, x):
        lj = self.log_joint(x)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def predict(self, x):
        return outputs_from_proba("nb", self.predict_proba(x))

    def state(self):
        return {"means": self.means, "variances": self.variances, "priors": self.priors}

    @classmethod
    def from_state(cls, arrays):
        return cls(arrays["means"], arrays["variances"], arrays["priors"])


def train_gnb(x, y):
    x, y = check_training_set(x, y)
    means = np.stack([x[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.stack([x[y == c].var(axis=0) for c in (0, 1)])
    variances = np.maximum(variances, VAR_FLOOR)
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])
    return GaussianNB(means, variances, priors)


def predict_gnb(model, x):
    return model.predict(x)
