"""First-order optimizers updating parameter arrays in place."""

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, ValidationError

ALGORITHMS = ("adam", "rmsprop", "adadelta", "adagrad", "sgd")


@dataclass(frozen=True)
class OptimizerSpec:
    algorithm: str
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.9
    adadelta_rho: float = 0.95
    eps: float = 1e-8
    adadelta_eps: float = 1e-6

    def __post_init__(self):
        if self.algorithm.lower() not in ALGORITHMS:
            raise ValidationError(f"unknown optimizer {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning rate must be positive, got {self.learning_rate}")


class Optimizer:
    """Holds per-parameter accumulators keyed by parameter name."""

    def __init__(self, spec):
        self.spec = spec
        self.algorithm = spec.algorithm.lower()
        self.state = {}
        self.t = 0

    def _slots(self, name, like, n):
        if name not in self.state:
            self.state[name] = [np.zeros_like(like) for _ in range(n)]
        return self.state[name]

    def step(self, params, grads):
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient for parameter {name} at step {self.t + 1}")
        self.t += 1
        s = self.spec
        lr = s.learning_rate
        for name, p in params.items():
            g = grads[name]
            if p.shape != g.shape:
                raise ValidationError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
            if self.algorithm == "sgd":
                p -= lr * g
            elif self.algorithm == "adam":
                m, v = self._slots(name, p, 2)
                m *= s.beta1
                m += (1.0 - s.beta1) * g
                v *= s.beta2
                v += (1.0 - s.beta2) * g * g
                m_hat = m / (1.0 - s.beta1 ** self.t)
                v_hat = v / (1.0 - s.beta2 ** self.t)
                p -= lr * m_hat / (np.sqrt(v_hat) + s.eps)
            elif self.algorithm == "rmsprop":
                (v,) = self._slots(name, p, 1)
                v *= s.rho
                v += (1.0 - s.rho) * g * g
                p -= lr * g / (np.sqrt(v) + s.eps)
            elif self.algorithm == "adagrad":
                (acc,) = self._slots(name, p, 1)
                acc += g * g
                p -= lr * g / (np.sqrt(acc) + s.eps)
            elif self.algorithm == "adadelta":
                eg, ed = self._slots(name, p, 2)
                r, eps = s.adadelta_rho, s.adadelta_eps
                eg *= r
                eg += (1.0 - r) * g * g
                delta = np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
                ed *= r
                ed += (1.0 - r) * delta * delta
                p -= lr * delta


def optimizer_step(params, grads, spec, optimizer=None):
    """Functional wrapper: apply one update, returning the optimizer holding state."""
    opt = optimizer if optimizer is not None else Optimizer(spec)
    opt.step(params, grads)
    return opt
