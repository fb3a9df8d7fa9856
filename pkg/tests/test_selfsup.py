import dataclasses

import numpy as np
import pytest

from agitation_ssl.data import CohortSpec, Normalizer, generate_cohort
from agitation_ssl.data.matrix import stack_counts
from agitation_ssl.errors import ValidationError
from agitation_ssl.nn import Optimizer, OptimizerSpec, fit
from agitation_ssl.selfsup import (ENCODER_SPECS, EncoderSpec, FrozenFeatureExtractor, TransformationClassifier,
                                   build_autoencoder, build_transformation_dataset, extract_features,
                                   extract_frozen, shape_trace, split_by_source, train_autoencoder,
                                   train_transformation_classifier)
from agitation_ssl.selfsup.transform import TransformationDataset, build_cnn_block


@pytest.fixture(scope="module")
def grids():
    c = generate_cohort(CohortSpec(n_homes=10, days_per_home=20, labelled_fraction=0.0, seed=5))
    counts = stack_counts(c.unlabelled)
    return Normalizer.fit(counts)(counts)


@pytest.fixture(scope="module")
def trained(grids):
    return [train_autoencoder(build_autoencoder(s, 0), grids, 10, 0) for s in ENCODER_SPECS]


def test_specs_match_table():
    assert [s.encoder_index for s in ENCODER_SPECS] == list(range(1, 11))
    assert ENCODER_SPECS[0] == EncoderSpec(1, 2, 43, 0.2, "max", 0.0001, 128, "rmsprop")
    assert [s.latent_size for s in ENCODER_SPECS] == [43] * 3 + [32] * 4 + [24] * 3


def test_spec_validation():
    with pytest.raises(ValidationError):
        EncoderSpec(1, 4, 43, 0.2, "max", 0.001, 32, "adam")
    with pytest.raises(ValidationError):
        EncoderSpec(1, 2, 43, 0.2, "median", 0.001, 32, "adam")


EXPECTED_POOLS = {1: [(12, 4)], 2: [(12, 4), (6, 2)], 3: [(12, 4), (6, 2), (3, 1)]}


@pytest.mark.parametrize("spec", ENCODER_SPECS, ids=lambda s: f"encoder{s.encoder_index}")
def test_shape_trace(spec):
    ae = build_autoencoder(spec, 0)
    pools, latent, out = shape_trace(ae)
    assert pools == EXPECTED_POOLS[spec.conv_block_count]
    assert latent == spec.latent_size
    assert out == (24, 8)
    x = np.random.default_rng(0).random((3, 24, 8))
    assert ae.encode(x).shape == (3, spec.latent_size)
    assert np.array_equal(ae.encode(x), ae.encode(x))
    assert ae.reconstruct(x).shape == (3, 24, 8)


def test_every_spec_trains_one_epoch(grids):
    for spec in ENCODER_SPECS:
        ae = train_autoencoder(build_autoencoder(spec, 1), grids[:40], 1, 1)
        assert len(ae.history) == 1 and np.isfinite(ae.history[0])
        assert ae.reconstruct(grids[:2]).shape == (2, 24, 8)


def test_zero_epochs_leaves_weights(grids):
    ae = build_autoencoder(ENCODER_SPECS[1], 0)
    before = {k: v.copy() for k, v in ae.network.named_params().items()}
    train_autoencoder(ae, grids[:8], 0, 0)
    assert ae.history == []
    assert all(np.array_equal(before[k], v) for k, v in ae.network.named_params().items())


def test_autoencoder_training_deterministic(grids):
    a = train_autoencoder(build_autoencoder(ENCODER_SPECS[4], 3), grids[:30], 2, 3)
    b = train_autoencoder(build_autoencoder(ENCODER_SPECS[4], 3), grids[:30], 2, 3)
    assert a.history == b.history


def test_overfit_single_sample_shipped_spec(grids):
    x = grids[:1]
    ae = train_autoencoder(build_autoencoder(ENCODER_SPECS[4], 0), x, 200, 0)
    assert ae.history[-1] < 0.1 * ae.history[0]
    assert np.mean((ae.reconstruct(x) - x) ** 2) < 0.01


@pytest.mark.parametrize("index", [5, 9])
@pytest.mark.parametrize("sample", [0, 3])
def test_overfit_single_sample_without_dropout(grids, index, sample):
    # dropout off isolates the optimisation path; specs with tiny rates, adadelta, or large Adam/RMSprop
    # steps (dead ReLUs) can stall within 200 steps
    spec = dataclasses.replace(ENCODER_SPECS[index - 1], dropout_rate=0.0)
    x = grids[sample:sample + 1]
    ae = train_autoencoder(build_autoencoder(spec, 0), x, 200, 0)
    assert ae.history[-1] < 0.1 * ae.history[0]
    assert np.mean((ae.reconstruct(x) - x) ** 2) < 0.01


def test_loss_curves_mostly_non_increasing(trained):
    steps = np.concatenate([np.diff(ae.history) for ae in trained])
    assert np.mean(steps <= 0) >= 0.9


def test_training_rejects_empty():
    with pytest.raises(ValidationError):
        train_autoencoder(build_autoencoder(ENCODER_SPECS[0], 0), np.zeros((0, 24, 8)), 1, 0)


def test_transformation_dataset_composition(grids, trained):
    x = grids[:5]
    ds = build_transformation_dataset(x, trained)
    assert len(ds) == 55
    assert np.bincount(ds.labels).tolist() == [5] * 11
    latents = [ae.scaled_latent(x) for ae in trained]
    for i in range(len(ds)):
        sample = ds[i]
        src, label = sample.source_index, sample.pseudo_label
        if label == 0:
            assert np.array_equal(sample.input, x[src].reshape(-1))
        else:
            ae = trained[label - 1]
            width = ae.spec.latent_size
            assert np.array_equal(sample.input[:width], latents[label - 1][src])
            assert np.all(sample.input[width:] == 0)
    assert np.all((ds.inputs >= 0) & (ds.inputs <= 1))


def test_label_one_padding(grids, trained):
    ds = build_transformation_dataset(grids[:1], trained)
    assert ds[1].pseudo_label == 1
    assert ds[1].input.shape == (192,) and np.all(ds[1].input[43:] == 0)


def test_dataset_needs_ten_encoders(grids, trained):
    with pytest.raises(ValidationError):
        build_transformation_dataset(grids[:2], trained[:9])


def test_split_holds_out_whole_sources(grids, trained):
    ds = build_transformation_dataset(grids[:20], trained)
    train, held = split_by_source(ds, 0.25, 0)
    assert len(held) == 5 * 11 and len(train) + len(held) == len(ds)
    assert not set(train.source_index) & set(held.source_index)


def test_cnn_length_trace():
    net = build_cnn_block(0)
    x = np.zeros((1, 192, 1))
    lengths = []
    for layer in net.layers:
        x = layer.forward(x)
        if type(layer).__name__ == "Pool":
            lengths.append(x.shape[1])
    assert lengths == [185, 178, 171]
    assert x.shape == (1, 171, 128)


def test_classifier_softmax_output():
    clf = TransformationClassifier(0)
    p = clf.predict_proba(np.random.default_rng(0).random((4, 192)))
    assert p.shape == (4, 11)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_untrained_accuracy_near_chance():
    # balanced labels independent of the inputs: any fixed classifier scores ~1/11
    rng = np.random.default_rng(0)
    n = 1100
    ds = TransformationDataset(rng.random((n, 192)), rng.permutation(np.tile(np.arange(11), n // 11)),
                               np.arange(n))
    assert abs(TransformationClassifier(0).accuracy(ds) - 1 / 11) <= 0.05


def test_transformation_training_deterministic_and_learns(grids, trained):
    ds = build_transformation_dataset(grids[:60], trained)
    train, held = split_by_source(ds, 0.2, 0)
    runs = []
    for _ in range(2):
        clf = TransformationClassifier(7)
        train_transformation_classifier(clf, train, 1, validation=held)
        runs.append(clf)
    assert runs[0].loss_history == runs[1].loss_history
    assert runs[0].accuracy_history == runs[1].accuracy_history
    assert runs[0].accuracy_history[0] > 1 / 11


def test_transformation_training_rejects_empty(grids, trained):
    ds = build_transformation_dataset(grids[:2], trained)
    with pytest.raises(ValidationError):
        train_transformation_classifier(TransformationClassifier(0), ds.subset(np.array([], dtype=int)), 1)


def test_frozen_extractor_copy_and_immutability():
    clf = TransformationClassifier(3)
    x = np.random.default_rng(1).random((3, 192))
    seq_before = clf.cnn.forward(x[..., None])
    ext = extract_frozen(clf)
    seq, pooled = extract_features(ext, x)
    assert np.array_equal(seq, seq_before)
    assert seq.shape == (3, 171, 128) and pooled.shape == (3, 128)
    np.testing.assert_allclose(pooled, seq.sum(axis=1) / 171, rtol=0, atol=1e-12)
    # later training of the source classifier does not leak into the copy
    snapshot = ext.state()
    clf.cnn.layers[0].params["w"] += 1.0
    assert all(np.array_equal(snapshot[k], v) for k, v in ext.state().items())
    with pytest.raises(ValidationError):
        ext.extra = 1
    with pytest.raises(ValueError):
        ext.named_params()["0.w"][0] = 5.0


def test_frozen_extractor_survives_training_loop():
    ext = FrozenFeatureExtractor(build_cnn_block(0).state_dict())
    before = ext.state()
    net = ext._net
    x = np.random.default_rng(0).random((4, 192, 1))
    target = net.forward(x) + 1.0
    fit(net, x, target, "mse", Optimizer(OptimizerSpec("adam", 0.1)), 2, 2, seed=0)
    assert all(np.array_equal(before[k], v) for k, v in ext.state().items())
