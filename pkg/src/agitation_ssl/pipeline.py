"""End-to-end model: self-supervised stage 1 and the fused stage-2 classifier."""

from dataclasses import dataclass, field

import numpy as np

from .classifiers import CLASSIFIER_IDS, MODEL_TYPES, hard_labels, train_base_classifiers
from .data.matrix import Normalizer
from .data.split import kfold_split, train_test_folds
from .errors import ValidationError
from .evaluation.baselines import train_baseline
from .fusion import FusionConfig, fusion_from_state, train_bccnet
from .rng import derive_seed
from .selfsup import (ENCODER_SPECS, FrozenFeatureExtractor, TransformationClassifier, build_autoencoder,
                      build_transformation_dataset, split_by_source, train_autoencoder,
                      train_transformation_classifier)
from .selfsup.transform import FEATURE_CHANNELS, FEATURE_LENGTH, build_cnn_block

INNER_FOLDS = 5


@dataclass
class Stage1Result:
    normalizer: Normalizer
    autoencoders: list
    classifier: TransformationClassifier
    holdout_accuracy: float
    extractor: FrozenFeatureExtractor = None

    def __post_init__(self):
        if self.extractor is None:
            self.extractor = FrozenFeatureExtractor.from_classifier(self.classifier)


def pretrain_autoencoders(unlabelled_counts, seed=0, epochs=10, log=None):
    """Fit the normalizer on unlabelled days, then the ten autoencoders on the normalized grids."""
    counts = np.asarray(unlabelled_counts, dtype=np.float64)
    if len(counts) == 0:
        raise ValidationError("stage 1 needs unlabelled days")
    log = log or (lambda msg: None)
    normalizer = Normalizer.fit(counts)
    grids = normalizer(counts)
    autoencoders = []
    for spec in ENCODER_SPECS:
        ae = train_autoencoder(build_autoencoder(spec, seed), grids, epochs, seed)
        if ae.history:
            log(f"autoencoder {spec.encoder_index}: final loss {ae.history[-1]:.5f}")
        autoencoders.append(ae)
    return normalizer, autoencoders


def train_selfsup(normalizer, autoencoders, unlabelled_counts, seed=0, epochs=2, holdout_fraction=0.1,
                  learning_rate=1e-3, batch_size=64, log=None):
    """Train the 11-way transformation classifier; returns it with its held-out accuracy."""
    log = log or (lambda msg: None)
    grids = normalizer(np.asarray(unlabelled_counts, dtype=np.float64))
    dataset = build_transformation_dataset(grids, autoencoders)
    train, held = split_by_source(dataset, holdout_fraction, seed)
    clf = TransformationClassifier(derive_seed(seed, "transform"))
    train_transformation_classifier(clf, train, epochs, learning_rate, batch_size, validation=held,
                                    on_epoch=lambda e, v: log(f"transformation epoch {e + 1}: loss {v:.4f}"))
    accuracy = clf.accuracy(held) if len(held) else float("nan")
    return clf, accuracy


def run_stage1(unlabelled_counts, seed=0, ae_epochs=10, transform_epochs=2, holdout_fraction=0.1,
               learning_rate=1e-3, batch_size=64, log=None):
    """Normalizer, autoencoders and transformation classifier in one call."""
    normalizer, autoencoders = pretrain_autoencoders(unlabelled_counts, seed, ae_epochs, log)
    clf, accuracy = train_selfsup(normalizer, autoencoders, unlabelled_counts, seed, transform_epochs,
                                  holdout_fraction, learning_rate, batch_size, log)
    return Stage1Result(normalizer, autoencoders, clf, accuracy)


def random_extractor(seed):
    """Same CNN block, randomly initialized and never trained (the supervised-only ablation)."""
    return FrozenFeatureExtractor(build_cnn_block(derive_seed(seed, "ablation-cnn")).state_dict())


def out_of_fold_labels(z, y, seed, folds=INNER_FOLDS, **options):
    """Hard labels of each base classifier on samples it was not trained on.

    Falls back to in-sample labels when the minority class is too small to split.
    """
    k = min(folds, int(np.bincount(y, minlength=2).min()))
    out = np.zeros((len(y), len(CLASSIFIER_IDS)), dtype=np.int64)
    if k < 2:
        return hard_labels(train_base_classifiers(z, y, **options), z)
    for train, test in train_test_folds(kfold_split(len(y), k, derive_seed(seed, "inner"), y, stratified=True)):
        models = train_base_classifiers(z[train], y[train], **options)
        out[test] = hard_labels(models, z[test])
    return out


@dataclass
class AgitationModel:
    """Frozen CNN features -> four base classifiers -> BCC fusion with a neural prior."""

    extractor: FrozenFeatureExtractor
    normalizer: Normalizer
    seed: int = 0
    fusion_config: FusionConfig = field(default_factory=FusionConfig)
    classifier_options: dict = field(default_factory=dict)
    feature_mean: np.ndarray = None
    feature_std: np.ndarray = None
    classifiers: dict = None
    fusion: object = None

    @property
    def threshold(self):
        return self.fusion_config.threshold

    def _features(self, counts):
        counts = np.asarray(counts, dtype=np.float64)
        x = self.normalizer(counts).reshape(len(counts), -1)
        return self.extractor.extract(x)

    def _standardize(self, pooled):
        return (pooled - self.feature_mean) / self.feature_std

    def fit(self, counts, labels):
        y = np.asarray(labels).astype(np.int64)
        if len(np.unique(y)) < 2:
            raise ValidationError("stage-2 training needs both classes")
        seq, pooled = self._features(counts)
        self.feature_mean = pooled.mean(axis=0)
        std = pooled.std(axis=0)
        std[std <= 0] = 1.0
        self.feature_std = std
        z = self._standardize(pooled)
        oof = out_of_fold_labels(z, y, self.seed, **self.classifier_options)
        self.classifiers = train_base_classifiers(z, y, **self.classifier_options)
        self.fusion = train_bccnet(seq, oof, y, self.fusion_config, derive_seed(self.seed, "fusion"))
        return self

    def base_labels(self, counts):
        _, pooled = self._features(counts)
        z = self._standardize(pooled)
        return hard_labels(self.classifiers, z)

    def posterior(self, counts):
        if self.fusion is None:
            raise ValidationError("model is not trained")
        seq, pooled = self._features(counts)
        z = self._standardize(pooled)
        return self.fusion.posterior(seq, hard_labels(self.classifiers, z))

    def scores(self, counts):
        return self.posterior(counts)[:, 1]

    def predict(self, counts, threshold=None):
        post = self.posterior(counts)
        t = self.threshold if threshold is None else threshold
        return post, post[:, 1] > t

    def state(self):
        arrays = {f"extractor.{k}": v for k, v in self.extractor.state().items()}
        arrays["normalizer.divisors"] = self.normalizer.divisors
        arrays["features.mean"] = self.feature_mean
        arrays["features.std"] = self.feature_std
        for cid in CLASSIFIER_IDS:
            arrays.update({f"{cid}.{k}": v for k, v in self.classifiers[cid].state().items()})
        arrays.update({f"fusion.{k}": v for k, v in self.fusion.state().items()})
        return arrays

    @classmethod
    def from_state(cls, arrays, fusion_config=FusionConfig(), seed=0):
        def part(prefix):
            return {k[len(prefix) + 1:]: v for k, v in arrays.items() if k.startswith(prefix + ".")}
        model = cls(FrozenFeatureExtractor(part("extractor")), Normalizer(arrays["normalizer.divisors"].copy()),
                    seed, fusion_config)
        model.feature_mean = arrays["features.mean"].copy()
        model.feature_std = arrays["features.std"].copy()
        model.classifiers = {cid: MODEL_TYPES[cid].from_state(part(cid)) for cid in CLASSIFIER_IDS}
        model.fusion = fusion_from_state(part("fusion"), FEATURE_LENGTH, FEATURE_CHANNELS)
        return model


@dataclass
class BaselineModel:
    """Adapter giving a comparison model the fit/scores interface used by the harness."""

    name: str
    seed: int
    normalizer: Normalizer
    options: dict = field(default_factory=dict)
    threshold: float = 0.5
    model: object = None

    def fit(self, counts, labels):
        x = self.normalizer(np.asarray(counts, dtype=np.float64))
        self.model = train_baseline(self.name, x.reshape(len(x), -1), labels, self.seed, **self.options)
        return self

    def scores(self, counts):
        x = self.normalizer(np.asarray(counts, dtype=np.float64))
        return self.model.predict_proba(x.reshape(len(x), -1))[:, 1]


MODEL_IDS = ("proposed", "supervised-only", "random-forest", "lstm")


def model_factory(model_id, normalizer, extractor=None, fusion_config=FusionConfig(), classifier_options=None,
                  baseline_options=None):
    """``factory(seed) -> untrained model`` for one registered model id."""
    classifier_options = classifier_options or {}
    baseline_options = baseline_options or {}
    if model_id == "proposed":
        if extractor is None:
            raise ValidationError("the proposed model needs a pretrained feature extractor")
        return lambda seed: AgitationModel(extractor, normalizer, seed, fusion_config, classifier_options)
    if model_id == "supervised-only":
        return lambda seed: AgitationModel(random_extractor(seed), normalizer, seed, fusion_config,
                                           classifier_options)
    if model_id in ("random-forest", "lstm"):
        opts = baseline_options.get(model_id, {})
        return lambda seed: BaselineModel(model_id, seed, normalizer, opts, fusion_config.threshold)
    raise ValidationError(f"unknown model {model_id!r}; choose from {', '.join(MODEL_IDS)}")
