"""Forward and backward kernels for the layer zoo.

Arrays are float64 and channels-last: ``(N, L, C)`` for sequences and
``(N, H, W, C)`` for grids. Each ``*_forward`` returns ``(out, cache)``; the
matching ``*_backward`` takes the upstream gradient and the cache.
"""

import itertools

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import ValidationError


def _pad_amounts(size, kernel, stride, padding):
    if padding == "valid":
        if kernel > size:
            raise ValidationError(f"window {kernel} larger than input extent {size} under valid padding")
        return 0, 0, (size - kernel) // stride + 1
    if padding == "same":
        out = -(-size // stride)
        total = max((out - 1) * stride + kernel - size, 0)
        return total // 2, total - total // 2, out
    raise ValidationError(f"unknown padding {padding!r}")


def _spatial_setup(shape, kernel, stride, padding):
    pads, outs = [], []
    for n, k, s in zip(shape, kernel, stride):
        lo, hi, o = _pad_amounts(n, k, s, padding)
        pads.append((lo, hi))
        outs.append(o)
    return pads, outs


def _windows(xp, kernel, stride):
    nd = len(kernel)
    axes = tuple(range(1, 1 + nd))
    win = sliding_window_view(xp, kernel, axis=axes)
    idx = (slice(None),) + tuple(slice(None, None, s) for s in stride)
    return win[idx]  # (N, *out, C, *kernel)


def _offset_slices(offset, stride, outs):
    return tuple(slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(offset, stride, outs))


# ---------------------------------------------------------------- convolution

def conv_forward(x, w, b, stride=1, padding="same"):
    """N-d convolution (cross-correlation) for 1 or 2 spatial dims.

    ``w`` has shape ``(*kernel, C_in, F)``; output channel ``j`` is the sum over
    input channels of ``w[..., :, j]`` slid over the input, plus ``b[j]``.
    """
    nd = w.ndim - 2
    if x.ndim != nd + 2:
        raise ValidationError(f"expected {nd + 2}-d input for {nd}-d convolution, got shape {x.shape}")
    kernel = w.shape[:nd]
    c_in, n_filt = w.shape[nd], w.shape[nd + 1]
    if x.shape[-1] != c_in:
        raise ValidationError(f"input has {x.shape[-1]} channels, filters expect {c_in}")
    stride = (stride,) * nd if np.isscalar(stride) else tuple(stride)
    pads, outs = _spatial_setup(x.shape[1:-1], kernel, stride, padding)
    xp = np.pad(x, [(0, 0)] + pads + [(0, 0)])
    win = _windows(xp, kernel, stride)
    # (N, *out, C, *k) -> (N, *out, *k, C) so rows line up with w.reshape(-1, F)
    perm = (0,) + tuple(range(1, 1 + nd)) + tuple(range(2 + nd, 2 + 2 * nd)) + (1 + nd,)
    n = x.shape[0]
    rows = n * int(np.prod(outs))
    cols = win.transpose(perm).reshape(rows, -1)
    wmat = w.reshape(-1, n_filt)
    out = (cols @ wmat + b).reshape((n, *outs, n_filt))
    cache = (x.shape, xp.shape, pads, outs, stride, cols, w)
    return out, cache


def conv_backward(grad, cache):
    x_shape, xp_shape, pads, outs, stride, cols, w = cache
    nd = w.ndim - 2
    kernel = w.shape[:nd]
    n_filt = w.shape[-1]
    g2 = grad.reshape(-1, n_filt)
    dw = (cols.T @ g2).reshape(w.shape)
    db = g2.sum(axis=0)
    if all(s == 1 for s in stride):
        # transposed convolution: correlate the padded gradient with the flipped kernel
        flip = (slice(None, None, -1),) * nd
        w_t = np.swapaxes(w[flip], -1, -2)
        gpads = [(k - 1 - lo, k - 1 - hi) for k, (lo, hi) in zip(kernel, pads)]
        gp = np.pad(grad, [(0, 0)] + gpads + [(0, 0)])
        dx, _ = conv_forward(gp, w_t, np.zeros(w.shape[nd]), 1, "valid")
        return dx, dw, db
    dcols = (g2 @ w.reshape(-1, n_filt).T).reshape((x_shape[0], *outs, *kernel, w.shape[nd]))
    dxp = np.zeros(xp_shape)
    for offset in itertools.product(*[range(k) for k in kernel]):
        target = (slice(None),) + _offset_slices(offset, stride, outs) + (slice(None),)
        source = (slice(None),) * (1 + nd) + offset + (slice(None),)
        dxp[target] += dcols[source]
    crop = (slice(None),) + tuple(slice(lo, lo + n) for (lo, _), n in zip(pads, x_shape[1:-1])) + (slice(None),)
    return dxp[crop], dw, db


# ---------------------------------------------------------------- pooling

def pool_forward(x, kind, size, stride, padding="valid"):
    """Max or mean pooling over 1 or 2 spatial dims.

    Max pooling records, per output cell, the flat index of the winning window
    offset (first occurrence on ties) for the backward pass.
    """
    if kind not in ("max", "mean"):
        raise ValidationError(f"unknown pooling kind {kind!r}")
    nd = x.ndim - 2
    size = (size,) * nd if np.isscalar(size) else tuple(size)
    stride = (stride,) * nd if np.isscalar(stride) else tuple(stride)
    pads, outs = _spatial_setup(x.shape[1:-1], size, stride, padding)
    fill = -np.inf if kind == "max" else 0.0
    xp = np.pad(x, [(0, 0)] + pads + [(0, 0)], constant_values=fill)
    offsets = list(itertools.product(*[range(k) for k in size]))
    views = ((slice(None),) + _offset_slices(o, stride, outs) + (slice(None),) for o in offsets)
    if kind == "max":
        first = next(views)
        out = xp[first].copy()
        arg = np.zeros(out.shape, dtype=np.intp)
        for flat_idx, view in enumerate(views, start=1):
            cand = xp[view]
            better = cand > out
            out[better] = cand[better]
            arg[better] = flat_idx
        return out, ("max", x.shape, xp.shape, pads, outs, size, stride, arg, None)
    ones = np.pad(np.ones(x.shape[1:-1]), pads)
    total = np.zeros((x.shape[0], *outs, x.shape[-1]))
    counts = np.zeros(outs)
    for o in offsets:
        sl = _offset_slices(o, stride, outs)
        total += xp[(slice(None),) + sl + (slice(None),)]
        counts += ones[sl]
    counts = counts[None, ..., None]
    return total / counts, ("mean", x.shape, xp.shape, pads, outs, size, stride, None, counts)


def pool_backward(grad, cache):
    kind, x_shape, xp_shape, pads, outs, size, stride, arg, counts = cache
    dxp = np.zeros(xp_shape)
    for flat_idx, offset in enumerate(itertools.product(*[range(k) for k in size])):
        target = (slice(None),) + _offset_slices(offset, stride, outs) + (slice(None),)
        if kind == "max":
            dxp[target] += grad * (arg == flat_idx)
        else:
            dxp[target] += grad / counts
    crop = (slice(None),) + tuple(slice(lo, lo + n) for (lo, _), n in zip(pads, x_shape[1:-1])) + (slice(None),)
    return dxp[crop]


def upsample_forward(x, size=2):
    out = x
    for axis in range(1, x.ndim - 1):
        out = np.repeat(out, size, axis=axis)
    return out, (x.shape, size)


def upsample_backward(grad, cache):
    x_shape, size = cache
    nd = len(x_shape) - 2
    shape = [x_shape[0]]
    for n in x_shape[1:-1]:
        shape += [n, size]
    shape.append(x_shape[-1])
    return grad.reshape(shape).sum(axis=tuple(2 + 2 * i for i in range(nd)))


# ---------------------------------------------------------------- dense & activations

def dense_forward(x, w, b):
    if x.shape[-1] != w.shape[0]:
        raise ValidationError(f"dense layer expects {w.shape[0]} inputs, got {x.shape[-1]}")
    return x @ w + b, x


def dense_backward(grad, x, w):
    d_in = w.shape[0]
    dw = x.reshape(-1, d_in).T @ grad.reshape(-1, w.shape[1])
    db = grad.reshape(-1, w.shape[1]).sum(axis=0)
    return grad @ w.T, dw, db


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(grad, x):
    # subgradient 0 at the kink
    return grad * (x > 0)


def sigmoid(x):
    return expit(x)


def softmax(x):
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(grad, s):
    return s * (grad - (grad * s).sum(axis=-1, keepdims=True))


def dropout_forward(x, rate, training, rng):
    if not training or rate == 0.0:
        return x, None
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"dropout rate must lie in [0, 1), got {rate}")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


# ---------------------------------------------------------------- LSTM

def lstm_forward(x, w, u, b, h0=None, c0=None):
    """Unrolled LSTM over ``x`` of shape ``(N, T, D)``; gate order i, f, g, o.

    Returns the hidden sequence ``(N, T, H)``.
    """
    n, t_len, d = x.shape
    hidden = u.shape[0]
    if w.shape != (d, 4 * hidden):
        raise ValidationError(f"LSTM input weights {w.shape} do not match input width {d}")
    h = np.zeros((n, hidden)) if h0 is None else h0
    c = np.zeros((n, hidden)) if c0 is None else c0
    xw = x @ w + b
    hs = np.empty((n, t_len, hidden))
    gates = np.empty((n, t_len, 4 * hidden))
    cs = np.empty((n, t_len + 1, hidden))
    cs[:, 0] = c
    h_prev = np.empty((n, t_len, hidden))
    for t in range(t_len):
        h_prev[:, t] = h
        z = xw[:, t] + h @ u
        a = np.empty_like(z)
        a[:, :hidden] = expit(z[:, :hidden])
        a[:, hidden:2 * hidden] = expit(z[:, hidden:2 * hidden])
        a[:, 2 * hidden:3 * hidden] = np.tanh(z[:, 2 * hidden:3 * hidden])
        a[:, 3 * hidden:] = expit(z[:, 3 * hidden:])
        c = a[:, hidden:2 * hidden] * c + a[:, :hidden] * a[:, 2 * hidden:3 * hidden]
        h = a[:, 3 * hidden:] * np.tanh(c)
        gates[:, t] = a
        cs[:, t + 1] = c
        hs[:, t] = h
    return hs, (x, gates, cs, h_prev, w, u)


def lstm_backward(grad, cache):
    x, gates, cs, h_prev, w, u = cache
    n, t_len, d = x.shape
    hidden = u.shape[0]
    dz_all = np.empty_like(gates)
    dh_next = np.zeros((n, hidden))
    dc_next = np.zeros((n, hidden))
    for t in reversed(range(t_len)):
        a = gates[:, t]
        i, f, g, o = (a[:, k * hidden:(k + 1) * hidden] for k in range(4))
        tc = np.tanh(cs[:, t + 1])
        dh = grad[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc ** 2)
        dz = dz_all[:, t]
        dz[:, :hidden] = dc * g * i * (1.0 - i)
        dz[:, hidden:2 * hidden] = dc * cs[:, t] * f * (1.0 - f)
        dz[:, 2 * hidden:3 * hidden] = dc * i * (1.0 - g ** 2)
        dz[:, 3 * hidden:] = dh * tc * o * (1.0 - o)
        dh_next = dz @ u.T
        dc_next = dc * f
    dz2 = dz_all.reshape(-1, 4 * hidden)
    dw = x.reshape(-1, d).T @ dz2
    du = h_prev.reshape(-1, hidden).T @ dz2
    db = dz2.sum(axis=0)
    dx = dz_all @ w.T
    return dx, dw, du, db
