"""Mini-batch training loop and batched inference."""

import numpy as np

from ..errors import NumericalError
from ..rng import stream
from .losses import loss


def compute_gradients(net, x, target, loss_kind, training=False):
    """Forward, loss, and reverse pass; returns ``(loss, {param name: grad})``."""
    out = net.forward(x, training=training)
    value, g = loss(out, target, loss_kind)
    value += net.penalty()
    net.backward(g)
    return value, {k: v.copy() for k, v in net.named_grads(trainable_only=True).items()}


def fit(net, x, y, loss_kind, optimizer, epochs, batch_size, seed, on_epoch=None):
    """Train ``net`` in place. Returns the mean training loss per epoch.

    Batches are drawn from a fresh permutation each epoch using
    ``stream(seed, "shuffle", epoch)``.
    """
    n = x.shape[0]
    history = []
    params = net.named_params(trainable_only=True)
    for epoch in range(epochs):
        order = stream(seed, "shuffle", epoch).permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            out = net.forward(x[idx], training=True)
            value, g = loss(out, y[idx], loss_kind)
            value += net.penalty()
            if not np.isfinite(value):
                raise NumericalError(f"non-finite loss at epoch {epoch + 1}")
            net.backward(g)
            optimizer.step(params, net.named_grads(trainable_only=True))
            total += value * len(idx)
        history.append(total / n)
        if on_epoch is not None:
            on_epoch(epoch, history[-1])
    net.clear_cache()
    return history


def predict(net, x, batch_size=256):
    if x.shape[0] == 0:
        out = net.forward(x, training=False)
    else:
        out = np.concatenate([net.forward(x[i:i + batch_size], training=False)
                              for i in range(0, x.shape[0], batch_size)])
    net.clear_cache()
    return out
