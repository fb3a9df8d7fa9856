"""Central finite-difference checks for every layer kind and loss."""

import numpy as np

from ..rng import stream
from . import layers as L
from .losses import binary_cross_entropy, categorical_cross_entropy, mse

STEP = 1e-5
TOLERANCE = 1e-4


def relative_error(analytic, numeric):
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


def _numeric(f, arr, step):
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + step
        up = f()
        arr[i] = old - step
        down = f()
        arr[i] = old
        grad[i] = (up - down) / (2 * step)
    return grad


def check_layer(layer, x, rng, step=STEP):
    """Relative errors of input and parameter gradients of ``sum(R * layer(x))``."""
    out = layer.forward(x)
    proj = rng.normal(size=out.shape)

    def objective():
        value = float(np.sum(proj * layer.forward(x)))
        return value + layer.penalty() if hasattr(layer, "penalty") else value

    layer.forward(x)
    dx = layer.backward(proj)
    analytic = {"input": dx}
    analytic.update({k: v.copy() for k, v in layer.grads.items()})
    errors = {"input": relative_error(analytic["input"], _numeric(objective, x, step))}
    for name, p in layer.params.items():
        errors[name] = relative_error(analytic[name], _numeric(objective, p, step))
    return errors


def check_loss(fn, pred, target, step=STEP):
    _, g = fn(pred, target)
    num = _numeric(lambda: fn(pred, target)[0], pred, step)
    return relative_error(g, num)


def _off_kink(rng, shape, margin=1e-2):
    x = rng.normal(size=shape)
    x[np.abs(x) < margin] += 2 * margin
    return x


def run_suite(seed=0):
    """Run every check. Returns a list of ``(name, max relative error, passed)``."""
    rng = stream(seed, "gradcheck")
    cases = [
        ("conv1d", L.Conv(2, 3, 4, rng), rng.normal(size=(2, 7, 2))),
        ("conv1d-valid-stride2", L.Conv(2, 3, 3, rng, stride=2, padding="valid"), rng.normal(size=(2, 9, 2))),
        ("conv2d", L.Conv(2, 3, (3, 3), rng), rng.normal(size=(2, 5, 4, 2))),
        ("dense", L.Dense(5, 3, rng), rng.normal(size=(4, 5))),
        ("dense-l2-per-step", L.Dense(4, 3, rng, l2=0.1), rng.normal(size=(2, 3, 4))),
        ("maxpool1d", L.Pool("max", 3, 1), rng.normal(size=(2, 8, 3))),
        ("meanpool1d", L.Pool("mean", 2, 2), rng.normal(size=(2, 8, 3))),
        ("maxpool2d", L.Pool("max", 2, 2), rng.normal(size=(2, 4, 4, 2))),
        ("meanpool2d", L.Pool("mean", 2, 2), rng.normal(size=(2, 4, 4, 2))),
        ("upsample2d", L.Upsample(2), rng.normal(size=(2, 3, 2, 2))),
        ("relu", L.ReLU(), _off_kink(rng, (3, 6))),
        ("sigmoid", L.Sigmoid(), rng.normal(size=(3, 6))),
        ("softmax", L.Softmax(), rng.normal(size=(3, 5))),
        ("pair-normalize", L.PairNormalize(), rng.uniform(0.1, 1.0, size=(4, 2))),
        ("lstm", L.LSTM(3, 4, rng), rng.normal(size=(2, 5, 3))),
        ("lstm-last-state", L.LSTM(3, 4, rng, return_sequences=False), rng.normal(size=(2, 5, 3))),
    ]
    results = []
    for name, layer, x in cases:
        errs = check_layer(layer, x, rng)
        worst = max(errs.values())
        results.append((name, worst, worst < TOLERANCE))
    p = rng.uniform(0.05, 0.95, size=(4, 3))
    loss_cases = [
        ("loss-mse", mse, rng.normal(size=(4, 3)), rng.normal(size=(4, 3))),
        ("loss-bce", binary_cross_entropy, p, rng.integers(0, 2, size=(4, 3)).astype(float)),
        ("loss-cce", categorical_cross_entropy, p / p.sum(axis=1, keepdims=True),
         rng.dirichlet(np.ones(3), size=4)),
    ]
    for name, fn, pred, target in loss_cases:
        err = check_loss(fn, pred.copy(), target)
        results.append((name, err, err < TOLERANCE))
    return results
