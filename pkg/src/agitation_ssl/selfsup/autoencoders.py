"""The ten convolutional autoencoders used as data transformations."""

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ValidationError
from ..nn import Conv, Dense, Dropout, Flatten, Optimizer, OptimizerSpec, Pool, ReLU, Reshape, Sequential, Sigmoid, Upsample
from ..nn.train import fit, predict
from ..rng import derive_seed, stream

GRID = (24, 8)
AE_FILTERS = 16


@dataclass(frozen=True)
class EncoderSpec:
    encoder_index: int
    conv_block_count: int
    latent_size: int
    dropout_rate: float
    pooling_kind: str
    learning_rate: float
    batch_size: int
    optimizer: str

    def __post_init__(self):
        if self.conv_block_count not in (1, 2, 3):
            raise ValidationError(f"conv_block_count must be 1, 2 or 3, got {self.conv_block_count}")
        if self.pooling_kind not in ("max", "mean"):
            raise ValidationError(f"pooling_kind must be max or mean, got {self.pooling_kind!r}")

    def to_dict(self):
        return asdict(self)


# index, blocks, latent, dropout, pooling, learning rate, batch, optimizer
ENCODER_SPECS = tuple(EncoderSpec(*row) for row in [
    (1, 2, 43, 0.2, "max", 0.0001, 128, "rmsprop"),
    (2, 2, 43, 0.4, "max", 0.003, 64, "adam"),
    (3, 3, 43, 0.4, "max", 0.1, 32, "adadelta"),
    (4, 1, 32, 0.1, "mean", 0.0001, 128, "adam"),
    (5, 1, 32, 0.3, "mean", 0.003, 32, "adagrad"),
    (6, 2, 32, 0.4, "mean", 0.01, 128, "rmsprop"),
    (7, 3, 32, 0.4, "mean", 0.01, 32, "adam"),
    (8, 1, 24, 0.2, "max", 0.01, 128, "adadelta"),
    (9, 3, 24, 0.1, "mean", 0.0005, 64, "rmsprop"),
    (10, 3, 24, 0.1, "mean", 0.1, 64, "adam"),
])


def bottleneck_grid(blocks):
    return GRID[0] >> blocks, GRID[1] >> blocks


@dataclass
class Autoencoder:
    spec: EncoderSpec
    encoder: Sequential
    decoder: Sequential
    history: list = field(default_factory=list)
    # min-max range of each latent feature over the training data
    latent_min: np.ndarray = None
    latent_max: np.ndarray = None

    @property
    def network(self):
        return Sequential([self.encoder, self.decoder])

    def encode(self, x):
        """Latent vectors for ``(N, 24, 8)`` normalized grids; dropout is off."""
        return predict(self.encoder, _as_grid(x))

    def reconstruct(self, x):
        return predict(self.network, _as_grid(x))[..., 0]

    def scaled_latent(self, x):
        """Latents min-max scaled to [0, 1] with the ranges seen in training."""
        z = self.encode(x)
        if self.latent_min is None:
            return z
        span = self.latent_max - self.latent_min
        span[span <= 0] = 1.0
        return np.clip((z - self.latent_min) / span, 0.0, 1.0)

    def state(self):
        arrays = {f"encoder.{k}": v for k, v in self.encoder.named_params().items()}
        arrays.update({f"decoder.{k}": v for k, v in self.decoder.named_params().items()})
        if self.latent_min is not None:
            arrays["latent.min"] = self.latent_min
            arrays["latent.max"] = self.latent_max
        return arrays

    def load(self, arrays):
        self.encoder.load_state_dict({k[8:]: v for k, v in arrays.items() if k.startswith("encoder.")})
        self.decoder.load_state_dict({k[8:]: v for k, v in arrays.items() if k.startswith("decoder.")})
        if "latent.min" in arrays:
            self.latent_min = arrays["latent.min"].copy()
            self.latent_max = arrays["latent.max"].copy()


def _as_grid(x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] == GRID:
        x = x[..., None]
    if x.shape[1:] != GRID + (1,):
        raise ValidationError(f"expected (N, 24, 8) grids, got {x.shape}")
    return x


def build_autoencoder(spec, seed):
    """Encoder: ``blocks`` x (3x3 conv, ReLU, dropout, 2/2 pooling), flatten, dense to latent.

    The decoder mirrors it: dense, reshape, ``blocks`` x (upsample 2, 3x3 conv,
    ReLU, dropout), then a 3x3 conv to one channel with a sigmoid, since
    inputs are normalized to [0, 1].
    """
    rng = stream(seed, "autoencoder", spec.encoder_index, "init")

    def dropout(tag, i):
        return Dropout(spec.dropout_rate, derive_seed(seed, "autoencoder", spec.encoder_index, tag, i))

    enc, channels = [], 1
    for i in range(spec.conv_block_count):
        enc += [Conv(channels, AE_FILTERS, (3, 3), rng), ReLU(), dropout("enc", i), Pool(spec.pooling_kind, 2, 2)]
        channels = AE_FILTERS
    h, w = bottleneck_grid(spec.conv_block_count)
    enc += [Flatten(), Dense(h * w * AE_FILTERS, spec.latent_size, rng)]
    dec = [Dense(spec.latent_size, h * w * AE_FILTERS, rng), ReLU(), Reshape((h, w, AE_FILTERS))]
    for i in range(spec.conv_block_count):
        dec += [Upsample(2), Conv(AE_FILTERS, AE_FILTERS, (3, 3), rng), ReLU(), dropout("dec", i)]
    dec += [Conv(AE_FILTERS, 1, (3, 3), rng), Sigmoid()]
    return Autoencoder(spec, Sequential(enc), Sequential(dec))


def train_autoencoder(model, x, epochs, seed, on_epoch=None):
    """Minimise reconstruction MSE with the optimizer, rate and batch size of its encoder spec."""
    grids = _as_grid(x)
    if grids.shape[0] == 0:
        raise ValidationError("autoencoder training needs at least one sample")
    spec = model.spec
    opt = Optimizer(OptimizerSpec(spec.optimizer, spec.learning_rate))
    history = fit(model.network, grids, grids, "mse", opt, epochs, spec.batch_size,
                  derive_seed(seed, "autoencoder", spec.encoder_index, "batches"), on_epoch)
    model.history = list(model.history) + history
    z = model.encode(grids)
    model.latent_min = z.min(axis=0)
    model.latent_max = z.max(axis=0)
    return model


def shape_trace(model, x=None):
    """Spatial shapes after each pooling layer, the latent width, and the output shape."""
    x = np.zeros((1, *GRID, 1)) if x is None else _as_grid(x)
    trace = []
    for layer in model.encoder.layers:
        x = layer.forward(x)
        if isinstance(layer, Pool):
            trace.append(tuple(x.shape[1:3]))
    latent = x.shape[-1]
    out = model.decoder.forward(x)
    return trace, latent, tuple(out.shape[1:3])
