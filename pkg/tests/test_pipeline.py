import numpy as np
import pytest

from agitation_ssl.classifiers import hard_labels, train_base_classifiers
from agitation_ssl.data import CohortSpec, Normalizer, generate_cohort, kfold_split
from agitation_ssl.data.split import train_test_folds
from agitation_ssl.data.matrix import labels_of, stack_counts
from agitation_ssl.errors import ValidationError
from agitation_ssl.fusion import FusionConfig
from agitation_ssl.nn.io import dumps_weights, loads_weights
from agitation_ssl.pipeline import (MODEL_IDS, AgitationModel, BaselineModel, model_factory, out_of_fold_labels,
                                    random_extractor)
from agitation_ssl.rng import derive_seed

FAST = FusionConfig(epochs_per_step=1, max_iter=2)


@pytest.fixture(scope="module")
def labelled():
    c = generate_cohort(CohortSpec(n_homes=6, days_per_home=8, labelled_fraction=0.75, seed=2))
    counts = stack_counts(c.labelled)
    return counts, labels_of(c.labelled), Normalizer.fit(stack_counts(c.labelled + c.unlabelled))


@pytest.fixture(scope="module")
def fitted(labelled):
    counts, y, norm = labelled
    return AgitationModel(random_extractor(1), norm, 4, FAST, {"knn_k": 3}).fit(counts, y)


def test_scores_are_probabilities(fitted, labelled):
    counts, _, _ = labelled
    s = fitted.scores(counts)
    assert s.shape == (len(counts),) and np.all((s >= 0) & (s <= 1))
    post, alerts = fitted.predict(counts)
    np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-12)
    assert np.array_equal(alerts, post[:, 1] > 0.5)
    assert not fitted.predict(counts, threshold=1.0)[1].any()
    assert fitted.base_labels(counts).shape == (len(counts), 4)


def test_fit_leaves_extractor_untouched(labelled):
    counts, y, norm = labelled
    ext = random_extractor(9)
    before = dumps_weights(ext.state())
    AgitationModel(ext, norm, 0, FAST, {"knn_k": 3}).fit(counts, y)
    assert dumps_weights(ext.state()) == before


def test_state_round_trip_bit_exact(fitted, labelled):
    counts, _, _ = labelled
    blob = dumps_weights(fitted.state())
    back = AgitationModel.from_state(loads_weights(blob)[0], FAST, 4)
    assert back.posterior(counts).tobytes() == fitted.posterior(counts).tobytes()
    assert dumps_weights(back.state()) == blob


def test_fit_deterministic(labelled):
    counts, y, norm = labelled
    a = AgitationModel(random_extractor(1), norm, 4, FAST, {"knn_k": 3}).fit(counts, y)
    b = AgitationModel(random_extractor(1), norm, 4, FAST, {"knn_k": 3}).fit(counts, y)
    assert dumps_weights(a.state()) == dumps_weights(b.state())


def test_fit_needs_both_classes(labelled):
    counts, y, norm = labelled
    with pytest.raises(ValidationError):
        AgitationModel(random_extractor(1), norm).fit(counts, np.zeros_like(y))
    with pytest.raises(ValidationError):
        AgitationModel(random_extractor(1), norm).scores(counts)


def test_out_of_fold_labels_match_manual_folds():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(30, 4))
    y = np.arange(30) % 2
    z[:, 0] += 3 * y
    oof = out_of_fold_labels(z, y, 0, knn_k=3)
    expected = np.zeros_like(oof)
    folds = kfold_split(30, 5, derive_seed(0, "inner"), y, stratified=True)
    for train, test in train_test_folds(folds):
        expected[test] = hard_labels(train_base_classifiers(z[train], y[train], knn_k=3), z[test])
    assert np.array_equal(oof, expected)
    # a single positive cannot be split: in-sample labels instead
    lone = np.r_[1, np.zeros(29, int)]
    assert np.array_equal(out_of_fold_labels(z, lone, 0, knn_k=3),
                          hard_labels(train_base_classifiers(z, lone, knn_k=3), z))


def test_factories(labelled):
    counts, y, norm = labelled
    assert MODEL_IDS == ("proposed", "supervised-only", "random-forest", "lstm")
    with pytest.raises(ValidationError):
        model_factory("proposed", norm)
    with pytest.raises(ValidationError):
        model_factory("vgg", norm)
    ablation = model_factory("supervised-only", norm, fusion_config=FAST)(3)
    assert dumps_weights(ablation.extractor.state()) == dumps_weights(random_extractor(3).state())
    rf = model_factory("random-forest", norm, baseline_options={"random-forest": {"n_trees": 5}})(0)
    assert isinstance(rf, BaselineModel)
    s = rf.fit(counts, y).scores(counts)
    assert s.shape == (len(y),) and rf.threshold == 0.5
