import numpy as np

from ..errors import ValidationError
from ..rng import stream


def kfold_split(n_samples, k, seed, labels=None, stratified=False):
    """Partition ``range(n_samples)`` into ``k`` disjoint folds.

    Indices are shuffled with ``stream(seed, "kfold")`` and dealt round-robin.
    In stratified mode each class is dealt in turn, continuing the same
    round-robin counter, so fold sizes still differ by at most one and each
    class count per fold differs by at most one.
    """
    if k < 2:
        raise ValidationError(f"k must be at least 2, got {k}")
    if k > n_samples:
        raise ValidationError(f"k={k} exceeds the number of samples ({n_samples})")
    rng = stream(seed, "kfold")
    if stratified:
        if labels is None:
            raise ValidationError("stratified split needs labels")
        labels = np.asarray(labels)
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    else:
        order = rng.permutation(n_samples)
    assign = np.arange(n_samples) % k
    return [np.sort(order[assign == f]) for f in range(k)]


def train_test_folds(folds):
    """Yield ``(train_idx, test_idx)`` for each fold."""
    for f, test in enumerate(folds):
        train = np.sort(np.concatenate([folds[g] for g in range(len(folds)) if g != f]))
        yield train, test
