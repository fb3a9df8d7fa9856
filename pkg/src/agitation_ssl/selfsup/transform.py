"""Pseudo-labelled transformation dataset and the transformation classifier.

Label 0 is the row-major flattened (normalized) grid; label ``j`` in 1..10
is the min-max scaled latent of encoder ``j`` zero-padded to 192 values.
Both feed a single 1-D CNN with one input channel.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..nn import Conv, Dense, Dropout, Flatten, Optimizer, OptimizerSpec, Pool, ReLU, Sequential, Softmax
from ..nn.train import fit, predict
from ..rng import derive_seed, stream

INPUT_LENGTH = 192
N_CLASSES = 11
# (filters, kernel) for the six convolutional blocks; max-pool 8/1 valid after every two
CNN_BLOCKS = ((32, 32), (32, 32), (64, 16), (64, 16), (128, 8), (128, 8))
POOL_SIZE = 8
BLOCK_DROPOUT = 0.1
FEATURE_LENGTH = INPUT_LENGTH - 3 * (POOL_SIZE - 1)
FEATURE_CHANNELS = CNN_BLOCKS[-1][0]


@dataclass
class TransformationSample:
    input: np.ndarray
    pseudo_label: int
    source_index: int


@dataclass
class TransformationDataset:
    inputs: np.ndarray  # (M, 192)
    labels: np.ndarray  # (M,)
    source_index: np.ndarray  # (M,) index of the originating grid

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return TransformationSample(self.inputs[i], int(self.labels[i]), int(self.source_index[i]))

    def subset(self, idx):
        return TransformationDataset(self.inputs[idx], self.labels[idx], self.source_index[idx])


def pad_to_input(vectors):
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape[1] > INPUT_LENGTH:
        raise ValidationError(f"cannot pad width {vectors.shape[1]} to {INPUT_LENGTH}")
    out = np.zeros((vectors.shape[0], INPUT_LENGTH))
    out[:, :vectors.shape[1]] = vectors
    return out


def build_transformation_dataset(grids, autoencoders):
    """11 samples per grid, ordered grid-major then label 0..10."""
    grids = np.asarray(grids, dtype=np.float64)
    if len(autoencoders) != N_CLASSES - 1:
        raise ValidationError(f"need {N_CLASSES - 1} encoders, got {len(autoencoders)}")
    n = grids.shape[0]
    blocks = [grids.reshape(n, -1)]
    for ae in sorted(autoencoders, key=lambda a: a.spec.encoder_index):
        blocks.append(pad_to_input(ae.scaled_latent(grids)))
    inputs = np.stack(blocks, axis=1).reshape(n * N_CLASSES, INPUT_LENGTH)
    labels = np.tile(np.arange(N_CLASSES), n)
    source = np.repeat(np.arange(n), N_CLASSES)
    return TransformationDataset(inputs, labels, source)


def build_cnn_block(seed):
    rng = stream(seed, "transform-cnn", "init")
    layers, channels = [], 1
    for i, (filters, kernel) in enumerate(CNN_BLOCKS):
        layers += [Conv(channels, filters, kernel, rng), ReLU(),
                   Dropout(BLOCK_DROPOUT, derive_seed(seed, "transform-cnn", "dropout", i))]
        channels = filters
        if i % 2 == 1:
            layers.append(Pool("max", POOL_SIZE, 1, "valid"))
    return Sequential(layers)


def build_dense_block(seed):
    rng = stream(seed, "transform-head", "init")
    return Sequential([Flatten(), Dense(FEATURE_LENGTH * FEATURE_CHANNELS, 128, rng), ReLU(),
                       Dense(128, N_CLASSES, rng), Softmax()])


class TransformationClassifier:
    """CNN block followed by a dense block with an 11-way softmax."""

    def __init__(self, seed):
        self.seed = seed
        self.cnn = build_cnn_block(seed)
        self.head = build_dense_block(seed)
        self.loss_history = []
        self.accuracy_history = []

    @property
    def network(self):
        return Sequential([self.cnn, self.head])

    def predict_proba(self, inputs, batch_size=128):
        return predict(self.network, _as_sequence(inputs), batch_size)

    def accuracy(self, dataset):
        return float(np.mean(self.predict_proba(dataset.inputs).argmax(axis=1) == dataset.labels))

    def state(self):
        arrays = {f"cnn.{k}": v for k, v in self.cnn.named_params().items()}
        arrays.update({f"head.{k}": v for k, v in self.head.named_params().items()})
        return arrays

    def load(self, arrays):
        self.cnn.load_state_dict({k[4:]: v for k, v in arrays.items() if k.startswith("cnn.")})
        self.head.load_state_dict({k[5:]: v for k, v in arrays.items() if k.startswith("head.")})


def build_transformation_classifier(seed):
    return TransformationClassifier(seed)


def _as_sequence(inputs):
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 2:
        inputs = inputs[..., None]
    if inputs.shape[1:] != (INPUT_LENGTH, 1):
        raise ValidationError(f"expected (N, 192) inputs, got {inputs.shape}")
    return inputs


def split_by_source(dataset, holdout_fraction, seed):
    """Hold out whole source grids so no grid has transforms on both sides."""
    sources = np.unique(dataset.source_index)
    order = stream(seed, "transform-split").permutation(sources)
    n_hold = int(round(holdout_fraction * len(sources)))
    held = np.isin(dataset.source_index, order[:n_hold])
    return dataset.subset(np.flatnonzero(~held)), dataset.subset(np.flatnonzero(held))


def train_transformation_classifier(clf, train, epochs, learning_rate=1e-3, batch_size=64,
                                    validation=None, on_epoch=None):
    if len(train) == 0:
        raise ValidationError("transformation dataset is empty")
    opt = Optimizer(OptimizerSpec("adam", learning_rate))
    targets = np.eye(N_CLASSES)[train.labels]
    x = _as_sequence(train.inputs)

    def after_epoch(epoch, value):
        clf.loss_history.append(value)
        if validation is not None and len(validation):
            clf.accuracy_history.append(clf.accuracy(validation))
        if on_epoch is not None:
            on_epoch(epoch, value)

    fit(clf.network, x, targets, "cce", opt, epochs, batch_size,
        derive_seed(clf.seed, "transform", "batches", len(clf.loss_history)), after_epoch)
    return clf


class FrozenFeatureExtractor:
    """Immutable copy of a trained CNN block.

    ``extract`` returns the ``(N, 171, 128)`` feature sequence and its mean
    over positions, ``(N, 128)``.
    """

    def __init__(self, cnn_state, seed=0):
        net = build_cnn_block(seed)
        net.load_state_dict(cnn_state)
        for layer in net.layers:
            layer.trainable = False
            for v in layer.params.values():
                v.flags.writeable = False
        object.__setattr__(self, "_net", net)

    @classmethod
    def from_classifier(cls, clf):
        return cls(clf.cnn.state_dict(), clf.seed)

    def __setattr__(self, name, value):
        raise ValidationError("frozen feature extractor cannot be modified")

    def state(self):
        return {k: v.copy() for k, v in self._net.named_params().items()}

    def named_params(self):
        return self._net.named_params()

    def extract(self, inputs, batch_size=128):
        seq = predict(self._net, _as_sequence(inputs), batch_size)
        return seq, seq.mean(axis=1)


def extract_frozen(clf):
    return FrozenFeatureExtractor.from_classifier(clf)


def extract_features(extractor, inputs):
    return extractor.extract(inputs)
