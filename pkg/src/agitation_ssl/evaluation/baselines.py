"""Comparison models: a CART random forest and a stacked-LSTM classifier on raw grids."""

from dataclasses import dataclass

import numpy as np

from ..classifiers.base import check_training_set
from ..errors import ValidationError
from ..nn import LSTM, Dense, Dropout, Optimizer, OptimizerSpec, ReLU, Sequential, Sigmoid
from ..nn.train import fit, predict
from ..rng import derive_seed, stream

N_TREES = 166
MAX_DEPTH = 110
MIN_SAMPLES_SPLIT = 2
MIN_SAMPLES_LEAF = 1


def _gini_sums(counts):
    """Size-weighted Gini impurity ``n * (1 - sum p^2)`` for count rows ``(..., 2)``."""
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = n - np.where(n > 0, (counts ** 2).sum(axis=-1) / n, 0.0)
    return g


def best_split(x, y, features):
    """Lowest weighted Gini over ``features``; returns ``(score, feature, threshold)`` or None.

    Thresholds are midpoints between consecutive distinct values; ties in score
    go to the earlier feature in ``features`` and then the lower threshold.
    """
    best = None
    onehot = np.eye(2)[y]
    total = onehot.sum(axis=0)
    for f in features:
        order = np.argsort(x[:, f], kind="stable")
        v = x[order, f]
        cuts = np.flatnonzero(v[1:] > v[:-1])
        cuts = cuts[(cuts + 1 >= MIN_SAMPLES_LEAF) & (len(v) - cuts - 1 >= MIN_SAMPLES_LEAF)]
        if cuts.size == 0:
            continue
        left = np.cumsum(onehot[order], axis=0)[cuts]
        score = _gini_sums(left) + _gini_sums(total - left)
        j = int(np.argmin(score))
        if best is None or score[j] < best[0] - 1e-12:
            best = (float(score[j]), int(f), float((v[cuts[j]] + v[cuts[j] + 1]) / 2))
    return best


@dataclass
class Tree:
    feature: np.ndarray    # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # (nodes, 2) class fractions

    def predict_proba(self, x):
        node = np.zeros(len(x), dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            rows = np.flatnonzero(inner)
            go_left = x[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])


def grow_tree(x, y, rng, max_features=None, max_depth=MAX_DEPTH):
    """Greedy CART tree. Candidate features are drawn without replacement; like
    common implementations, drawing continues past ``max_features`` while only
    constant features have been seen."""
    n_features = x.shape[1]
    m = n_features if max_features is None else max_features
    feature, threshold, left, right, value = [], [], [], [], []

    def node(idx, depth):
        i = len(feature)
        counts = np.bincount(y[idx], minlength=2).astype(np.float64)
        feature.append(-1), threshold.append(0.0), left.append(-1), right.append(-1)
        value.append(counts / counts.sum())
        if depth >= max_depth or len(idx) < MIN_SAMPLES_SPLIT or counts.min() == 0:
            return i
        split = None
        for count, f in enumerate(rng.permutation(n_features)):
            if count >= m and split is not None:
                break
            found = best_split(x[idx], y[idx], [f])
            if found is not None and (split is None or found[0] < split[0] - 1e-12):
                split = found
        if split is None:
            return i
        _, f, t = split
        mask = x[idx, f] <= t
        feature[i], threshold[i] = f, t
        left[i] = node(idx[mask], depth + 1)
        right[i] = node(idx[~mask], depth + 1)
        return i

    node(np.arange(len(y)), 0)
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right), np.array(value))


@dataclass
class RandomForest:
    trees: list

    def predict_proba(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
        return np.mean([t.predict_proba(x) for t in self.trees], axis=0)

    def predict(self, x):
        return (self.predict_proba(x)[:, 1] > 0.5).astype(np.int64)


def train_random_forest(x, y, seed=0, n_trees=N_TREES, max_depth=MAX_DEPTH):
    """No bootstrap: every tree sees all samples, diversity comes from feature subsampling."""
    x, y = check_training_set(np.asarray(x, dtype=np.float64).reshape(len(x), -1), y)
    m = max(1, int(np.sqrt(x.shape[1])))
    trees = [grow_tree(x, y, stream(seed, "forest", t), m, max_depth) for t in range(n_trees)]
    return RandomForest(trees)


LSTM_UNITS = 200
LSTM_DROPOUT = 0.2
LSTM_LR = 5e-4


def build_lstm_baseline(seed):
    rng = stream(seed, "lstm-baseline", "init")
    return Sequential([
        LSTM(8, LSTM_UNITS, rng, return_sequences=True), ReLU(),
        Dropout(LSTM_DROPOUT, derive_seed(seed, "lstm-baseline", "dropout", 0)),
        LSTM(LSTM_UNITS, LSTM_UNITS, rng, return_sequences=False), ReLU(),
        Dropout(LSTM_DROPOUT, derive_seed(seed, "lstm-baseline", "dropout", 1)),
        Dense(LSTM_UNITS, 2, rng), Sigmoid(),
    ])


@dataclass
class LSTMBaseline:
    network: Sequential
    history: list

    def outputs(self, x):
        """Raw sigmoid pair per sample."""
        return predict(self.network, np.asarray(x, dtype=np.float64).reshape(len(x), 24, 8))

    def predict_proba(self, x):
        out = self.outputs(x)
        return out / out.sum(axis=1, keepdims=True)

    def predict(self, x):
        return (self.predict_proba(x)[:, 1] > 0.5).astype(np.int64)


def train_lstm_baseline(x, y, seed=0, epochs=30, batch_size=32):
    x = np.asarray(x, dtype=np.float64)
    x, y = check_training_set(x.reshape(len(x), -1), y)
    net = build_lstm_baseline(seed)
    history = fit(net, x.reshape(len(x), 24, 8), np.eye(2)[y], "bce", Optimizer(OptimizerSpec("adam", LSTM_LR)),
                  epochs, batch_size, derive_seed(seed, "lstm-baseline", "batches"))
    return LSTMBaseline(net, history)


BASELINES = ("random-forest", "lstm")


def train_baseline(name, x, y, seed=0, **options):
    if name == "random-forest":
        return train_random_forest(x, y, seed, **options)
    if name == "lstm":
        return train_lstm_baseline(x, y, seed, **options)
    raise ValidationError(f"unknown baseline {name!r}; choose from {', '.join(BASELINES)}")
