"""Layers with explicit forward/backward passes and a Sequential container."""

import numpy as np

from ..errors import ValidationError
from ..rng import stream
from . import ops


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base class. Parameters live in ``params``; ``backward`` fills ``grads``."""

    trainable = True

    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def forward(self, x, training=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def __call__(self, x, training=False):
        return self.forward(x, training)

    def _take_cache(self):
        if self._cache is None:
            raise ValidationError(f"{type(self).__name__}.backward called before forward")
        return self._cache

    def clear_cache(self):
        """Drop forward activations (im2col buffers can be large) once no backward pass follows."""
        self._cache = None

    def zero_grad(self):
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)


class Conv(Layer):
    """Convolution over 1 or 2 spatial dims (``kernel_size`` an int or a pair)."""

    def __init__(self, in_channels, filters, kernel_size, rng, stride=1, padding="same"):
        super().__init__()
        kernel = (kernel_size,) if np.isscalar(kernel_size) else tuple(kernel_size)
        if (np.isscalar(stride) and stride < 1) or (not np.isscalar(stride) and min(stride) < 1):
            raise ValidationError("stride must be >= 1")
        receptive = int(np.prod(kernel))
        self.params["w"] = glorot_uniform(rng, (*kernel, in_channels, filters),
                                          receptive * in_channels, receptive * filters)
        self.params["b"] = np.zeros(filters)
        self.stride = stride
        self.padding = padding

    def forward(self, x, training=False):
        out, self._cache = ops.conv_forward(x, self.params["w"], self.params["b"], self.stride, self.padding)
        return out

    def backward(self, grad):
        dx, dw, db = ops.conv_backward(grad, self._take_cache())
        self.grads["w"] = dw
        self.grads["b"] = db
        return dx


class Dense(Layer):
    """Affine map on the last axis, so it also applies per time step."""

    def __init__(self, in_features, out_features, rng, l2=0.0):
        super().__init__()
        self.params["w"] = glorot_uniform(rng, (in_features, out_features), in_features, out_features)
        self.params["b"] = np.zeros(out_features)
        self.l2 = l2

    def forward(self, x, training=False):
        out, self._cache = ops.dense_forward(x, self.params["w"], self.params["b"])
        return out

    def backward(self, grad):
        dx, dw, db = ops.dense_backward(grad, self._take_cache(), self.params["w"])
        if self.l2:
            dw = dw + 2.0 * self.l2 * self.params["w"]
        self.grads["w"] = dw
        self.grads["b"] = db
        return dx

    def penalty(self):
        return self.l2 * float(np.sum(self.params["w"] ** 2))


class ReLU(Layer):
    def forward(self, x, training=False):
        self._cache = x
        return ops.relu(x)

    def backward(self, grad):
        return ops.relu_backward(grad, self._take_cache())


class Sigmoid(Layer):
    def forward(self, x, training=False):
        out = ops.sigmoid(x)
        self._cache = out
        return out

    def backward(self, grad):
        s = self._take_cache()
        return grad * s * (1.0 - s)


class Softmax(Layer):
    def forward(self, x, training=False):
        out = ops.softmax(x)
        self._cache = out
        return out

    def backward(self, grad):
        return ops.softmax_backward(grad, self._take_cache())


class PairNormalize(Layer):
    """Rescale non-negative outputs (e.g. independent sigmoids) to sum to one."""

    def forward(self, x, training=False):
        total = x.sum(axis=-1, keepdims=True)
        self._cache = (x, total)
        return x / total

    def backward(self, grad):
        x, total = self._take_cache()
        return grad / total - (grad * x).sum(axis=-1, keepdims=True) / total ** 2


class Dropout(Layer):
    """Inverted dropout; identity at inference.

    Each training-mode call draws its mask from ``stream(seed, "dropout", n)``
    where ``n`` counts calls, so a run is reproducible from its seed.
    """

    def __init__(self, rate, seed):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValidationError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.seed = seed
        self.calls = 0

    def forward(self, x, training=False):
        rng = None
        if training and self.rate > 0:
            rng = stream(self.seed, "dropout", self.calls)
            self.calls += 1
        out, self._cache = ops.dropout_forward(x, self.rate, training, rng)
        return out

    def backward(self, grad):
        if self._cache is None:
            return grad
        return grad * self._cache


class Pool(Layer):
    def __init__(self, kind, size, stride, padding="valid"):
        super().__init__()
        if kind not in ("max", "mean"):
            raise ValidationError(f"unknown pooling kind {kind!r}")
        self.kind, self.size, self.stride, self.padding = kind, size, stride, padding

    def forward(self, x, training=False):
        out, self._cache = ops.pool_forward(x, self.kind, self.size, self.stride, self.padding)
        return out

    def backward(self, grad):
        return ops.pool_backward(grad, self._take_cache())


class Upsample(Layer):
    def __init__(self, size=2):
        super().__init__()
        self.size = size

    def forward(self, x, training=False):
        out, self._cache = ops.upsample_forward(x, self.size)
        return out

    def backward(self, grad):
        return ops.upsample_backward(grad, self._take_cache())


class Flatten(Layer):
    def forward(self, x, training=False):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._take_cache())


class Reshape(Layer):
    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)

    def forward(self, x, training=False):
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, grad):
        return grad.reshape(self._take_cache())


class LSTM(Layer):
    """Single LSTM layer with zero initial state.

    With ``return_sequences=False`` only the final hidden state is emitted.
    """

    def __init__(self, input_size, hidden_size, rng, return_sequences=True):
        super().__init__()
        h = hidden_size
        self.params["w"] = glorot_uniform(rng, (input_size, 4 * h), input_size, 4 * h)
        self.params["u"] = glorot_uniform(rng, (h, 4 * h), h, 4 * h)
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0
        self.params["b"] = b
        self.hidden_size = h
        self.return_sequences = return_sequences

    def forward(self, x, training=False):
        hs, cache = ops.lstm_forward(x, self.params["w"], self.params["u"], self.params["b"])
        self._cache = (cache, hs.shape)
        return hs if self.return_sequences else hs[:, -1]

    def backward(self, grad):
        cache, shape = self._take_cache()
        if not self.return_sequences:
            full = np.zeros(shape)
            full[:, -1] = grad
            grad = full
        dx, dw, du, db = ops.lstm_backward(grad, cache)
        self.grads.update(w=dw, u=du, b=db)
        return dx


class Sequential(Layer):
    def __init__(self, layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def clear_cache(self):
        for layer in self.layers:
            layer.clear_cache()

    def named_params(self, trainable_only=False):
        out = {}
        for i, layer in enumerate(self.layers):
            if trainable_only and not layer.trainable:
                continue
            sub = layer.named_params(trainable_only) if isinstance(layer, Sequential) else layer.params
            for k, v in sub.items():
                out[f"{i}.{k}"] = v
        return out

    def named_grads(self, trainable_only=False):
        out = {}
        for i, layer in enumerate(self.layers):
            if trainable_only and not layer.trainable:
                continue
            sub = layer.named_grads(trainable_only) if isinstance(layer, Sequential) else layer.grads
            for k, v in sub.items():
                out[f"{i}.{k}"] = v
        return out

    def penalty(self):
        return sum(layer.penalty() for layer in self.layers if hasattr(layer, "penalty"))

    def state_dict(self):
        return {k: v.copy() for k, v in self.named_params().items()}

    def load_state_dict(self, state):
        own = self.named_params()
        missing = set(own) ^ set(state)
        if missing:
            raise ValidationError(f"state dict keys do not match network: {sorted(missing)[:5]}")
        for k, v in own.items():
            if v.shape != state[k].shape:
                raise ValidationError(f"shape mismatch for {k}: {v.shape} vs {state[k].shape}")
            v[...] = state[k]
