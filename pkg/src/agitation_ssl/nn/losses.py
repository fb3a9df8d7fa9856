"""Loss functions. Each returns ``(value, d value / d pred)``."""

import numpy as np

from ..errors import ValidationError

EPS = 1e-12


def _check(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValidationError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return pred, target


def mse(pred, target):
    pred, target = _check(pred, target)
    diff = pred - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def binary_cross_entropy(pred, target):
    """Mean element-wise BCE; probabilities clamped to [1e-12, 1 - 1e-12]."""
    pred, target = _check(pred, target)
    p = np.clip(pred, EPS, 1.0 - EPS)
    value = -np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))
    grad = (p - target) / (p * (1.0 - p)) / p.size
    return float(value), grad


def categorical_cross_entropy(pred, target):
    """Mean over samples of -sum_t target_t log pred_t (soft targets allowed)."""
    pred, target = _check(pred, target)
    p = np.clip(pred, EPS, None)
    n = pred.shape[0] if pred.ndim > 1 else 1
    value = -np.sum(target * np.log(p)) / n
    return float(value), -target / p / n


LOSSES = {
    "mse": mse,
    "binary-cross-entropy": binary_cross_entropy,
    "bce": binary_cross_entropy,
    "categorical-cross-entropy": categorical_cross_entropy,
    "cce": categorical_cross_entropy,
}


def loss(pred, target, kind):
    try:
        fn = LOSSES[kind]
    except KeyError:
        raise ValidationError(f"unknown loss {kind!r}") from None
    return fn(pred, target)
