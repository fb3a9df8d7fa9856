"""Gaussian naive Bayes, KNN, SVM and GP classifiers over pooled features."""

import numpy as np

from .base import CLASSIFIER_IDS, BaseClassifierOutput
from .gnb import GaussianNB, predict_gnb, train_gnb
from .gp import GaussianProcessClassifier, predict_gp, train_gp
from .knn import KNN, predict_knn, train_knn
from .svm import SVM, predict_svm, train_svm

MODEL_TYPES = {"nb": GaussianNB, "knn": KNN, "svm": SVM, "gp": GaussianProcessClassifier}


def train_base_classifiers(x, y, knn_k=5, svm_c=10.0, gp_noise=1e-3):
    """Fit all four classifiers on the same features; returns ``{id: model}``."""
    return {
        "nb": train_gnb(x, y),
        "knn": train_knn(x, y, min(knn_k, len(y))),
        "svm": train_svm(x, y, C=svm_c),
        "gp": train_gp(x, y, noise=gp_noise),
    }


def hard_labels(models, x):
    """``(N, 4)`` argmax labels in CLASSIFIER_IDS order; a 0.5/0.5 tie goes to class 0."""
    return np.stack([(models[c].predict_proba(x)[:, 1] > 0.5).astype(np.int64) for c in CLASSIFIER_IDS], axis=1)
