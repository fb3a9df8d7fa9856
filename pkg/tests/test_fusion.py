import numpy as np
import pytest
from scipy.special import digamma

from agitation_ssl.errors import NumericalError
from agitation_ssl.fusion import (FusionConfig, build_combiner, default_prior, e_step, e_step_log,
                                  expected_log_confusion, free_energy, fusion_from_state, m_step_confusion,
                                  m_step_network, posterior_mean_confusion, run_bcc, train_bccnet)
from agitation_ssl.nn.gradcheck import relative_error
from agitation_ssl.nn.io import dumps_weights, loads_weights
from agitation_ssl.nn.train import compute_gradients


def simulate_annotators(n, k, diagonal, seed, prevalence=0.5):
    rng = np.random.default_rng(seed)
    truth = (rng.random(n) < prevalence).astype(int)
    correct = rng.random((n, k)) < diagonal
    labels = np.where(correct, truth[:, None], 1 - truth[:, None])
    return truth, labels


# E-step

def test_e_step_identity_confusion():
    with np.errstate(divide="ignore"):
        log_conf = np.log(np.array([[[1.0, 0.0], [0.0, 1.0]]]))
        q = e_step_log(np.log(np.full((1, 2), 0.5)), np.array([[1]]), log_conf)
    assert q.tolist() == [[0.0, 1.0]]


def test_e_step_point_mass_confusion_enumeration():
    conf = np.array([[[0.8, 0.2], [0.2, 0.8]]])
    q = e_step_log(np.log(np.full((1, 2), 0.5)), np.array([[0]]), np.log(conf))
    # both hypotheses: P(t=0, c=0) = 0.5 * 0.8, P(t=1, c=0) = 0.5 * 0.2
    np.testing.assert_allclose(q, [[0.8, 0.2]], rtol=0, atol=1e-15)


def test_e_step_symmetric_dirichlet_returns_prior():
    assert digamma(1.0) - digamma(2.0) == pytest.approx(-1.0, abs=1e-15)
    prior = np.array([[0.3, 0.7], [0.9, 0.1]])
    q = e_step(prior, np.array([[0, 1, 1], [1, 1, 0]]), np.ones((3, 2, 2)))
    np.testing.assert_allclose(q, prior, rtol=0, atol=1e-15)


def test_e_step_worked_case_by_hand():
    alpha = np.array([[[4.0, 1.0], [2.0, 3.0]], [[2.0, 2.0], [1.0, 5.0]]])
    prior = np.array([[0.4, 0.6]])
    labels = np.array([[0, 1]])
    unnorm = []
    for t in (0, 1):
        s = np.log(prior[0, t])
        for k, c in enumerate(labels[0]):
            s += digamma(alpha[k, t, c]) - digamma(alpha[k, t].sum())
        unnorm.append(np.exp(s))
    expected = np.array(unnorm) / sum(unnorm)
    np.testing.assert_allclose(e_step(prior, labels, alpha)[0], expected, rtol=1e-14)


def test_e_step_valid_and_shift_invariant():
    rng = np.random.default_rng(0)
    log_prior = rng.normal(size=(30, 2))
    labels = rng.integers(0, 2, (30, 4))
    log_conf = expected_log_confusion(rng.uniform(0.5, 5, (4, 2, 2)))
    q = e_step_log(log_prior, labels, log_conf)
    assert np.all(q >= 0)
    np.testing.assert_allclose(q.sum(axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(e_step_log(log_prior + 123.4, labels, log_conf), q, atol=1e-14)


def test_e_step_zero_mass_rejected():
    with np.errstate(divide="ignore"):
        with pytest.raises(NumericalError):
            e_step_log(np.log(np.zeros((1, 2))), np.array([[0]]), np.zeros((1, 2, 2)))


# confusion M-step

def test_m_step_examples():
    alpha0 = default_prior(2)
    assert np.array_equal(m_step_confusion(np.zeros((0, 2)), np.zeros((0, 2)), alpha0), alpha0)
    q = np.tile([0.0, 1.0], (10, 1))
    alpha = m_step_confusion(q, np.ones((10, 1), dtype=int), np.ones((1, 2, 2)))
    assert alpha[0, 1, 1] == 11 and alpha[0, 1, 0] == 1 and np.all(alpha[0, 0] == 1)


def test_m_step_matches_accumulation_loop():
    rng = np.random.default_rng(1)
    q = rng.dirichlet([1, 1], size=12)
    labels = rng.integers(0, 2, (12, 3))
    alpha0 = rng.uniform(0.5, 2, (3, 2, 2))
    expected = alpha0.copy()
    for i in range(12):
        for k in range(3):
            for t in range(2):
                expected[k, t, labels[i, k]] += q[i, t]
    np.testing.assert_allclose(m_step_confusion(q, labels, alpha0), expected, rtol=0, atol=1e-13)


def test_clamped_counts_equal_confusion_tally():
    truth, labels = simulate_annotators(200, 4, 0.7, 2)
    q, alpha, _ = run_bcc(labels, observed=truth)
    assert np.array_equal(q, np.eye(2)[truth])
    tally = default_prior(4)
    for k in range(4):
        for t in (0, 1):
            for c in (0, 1):
                tally[k, t, c] += np.sum((truth == t) & (labels[:, k] == c))
    assert np.array_equal(alpha, tally)


# variational EM without the network

@pytest.mark.parametrize("seed", range(5))
def test_dawid_skene_recovery(seed):
    truth, labels = simulate_annotators(1000, 3, 0.8, seed)
    q, alpha, _ = run_bcc(labels, max_iter=200, tol=1e-8)
    conf = posterior_mean_confusion(alpha)
    diag = np.stack([conf[:, 0, 0], conf[:, 1, 1]])
    assert np.all(np.abs(diag - 0.8) <= 0.05)
    inferred = np.mean(q.argmax(axis=1) == truth)
    majority = np.mean((labels.sum(axis=1) >= 2) == truth)
    assert inferred >= majority


@pytest.mark.parametrize("seed", range(20))
def test_free_energy_monotone(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(5, 80)), int(rng.integers(1, 6))
    labels = rng.integers(0, 2, (n, k))
    prior = rng.dirichlet([1, 1], size=n)
    alpha0 = rng.uniform(0.5, 3, (k, 2, 2))
    observed = np.where(rng.random(n) < 0.3, rng.integers(0, 2, n), -1) if seed % 2 else None
    _, _, trace = run_bcc(labels, prior, alpha0, observed, max_iter=40, tol=0)
    assert np.all(np.diff(trace) >= -1e-8)


def test_free_energy_is_bound_peak_at_e_step():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 2, (20, 3))
    prior = rng.dirichlet([2, 2], size=20)
    alpha0 = default_prior(3)
    alpha = m_step_confusion(rng.dirichlet([1, 1], size=20), labels, alpha0)
    best = free_energy(e_step(prior, labels, alpha), labels, alpha, alpha0, prior)
    for _ in range(10):
        other = rng.dirichlet([1, 1], size=20)
        assert free_energy(other, labels, alpha, alpha0, prior) <= best + 1e-12


@pytest.mark.parametrize("strength", [1.0, 10.0, 100.0])
def test_single_perfect_annotator_reproduced(strength):
    rng = np.random.default_rng(4)
    truth = rng.integers(0, 2, 100)
    alpha0 = default_prior(1, diagonal=strength, off_diagonal=strength)
    q, _, _ = run_bcc(truth[:, None], alpha0=alpha0, max_iter=100)
    assert np.array_equal(q.argmax(axis=1), truth)


# neural combiner and the full fusion loop

def tiny_sequences(n, seed, seq_len=5, features=3):
    return np.random.default_rng(seed).normal(size=(n, seq_len, features))


def test_combiner_outputs_distribution():
    net = build_combiner(5, 3, 0)
    p = net.forward(tiny_sequences(4, 0))
    assert p.shape == (4, 2) and np.all((p > 0) & (p < 1))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-15)


def test_m_step_network_zero_epochs():
    net = build_combiner(5, 3, 0)
    before = net.state_dict()
    assert m_step_network(net, tiny_sequences(4, 0), np.full((4, 2), 0.5), 0, 0) == []
    assert all(np.array_equal(before[k], v) for k, v in net.state_dict().items())


def test_soft_target_gradient_matches_finite_differences():
    net = build_combiner(4, 2, 0, l2=1e-2)
    x = tiny_sequences(3, 1, 4, 2)
    q = np.random.default_rng(2).dirichlet([1, 1], size=3)
    _, grads = compute_gradients(net, x, q, "cce")
    params = net.named_params()
    step = 1e-6
    pick = np.random.default_rng(3)
    for name in ("0.w", "0.u", "0.b", "1.w", "1.b", "4.w", "4.b"):
        arr = params[name]
        # a random sample of entries keeps the 128-unit recurrent matrix affordable
        flat = pick.choice(arr.size, size=min(arr.size, 40), replace=False)
        analytic, numeric = [], []
        for j in flat:
            idx = np.unravel_index(j, arr.shape)
            old = arr[idx]
            arr[idx] = old + step
            up = compute_gradients(net, x, q, "cce")[0]
            arr[idx] = old - step
            down = compute_gradients(net, x, q, "cce")[0]
            arr[idx] = old
            analytic.append(grads[name][idx])
            numeric.append((up - down) / (2 * step))
        assert relative_error(np.array(analytic), np.array(numeric)) < 1e-4, name


def test_point_mass_targets_are_supervised_training():
    x = tiny_sequences(40, 3)
    y = (x[:, :, 0].mean(axis=1) > 0).astype(int)
    net = build_combiner(5, 3, 0)
    history = m_step_network(net, x, np.eye(2)[y], 30, 0, learning_rate=1e-2, batch_size=8)
    assert history[-1] < 0.5 * history[0]
    assert np.mean(net.forward(x).argmax(axis=1) == y) >= 0.9


def fusion_problem(n=30, seed=0):
    truth, labels = simulate_annotators(n, 4, 0.8, seed)
    return tiny_sequences(n, seed), labels, truth


def test_train_bccnet_all_observed_counts():
    x, labels, truth = fusion_problem()
    state = train_bccnet(x, labels, truth, FusionConfig(epochs_per_step=1, max_iter=5))
    tally = default_prior(4)
    for i in range(len(truth)):
        for k in range(4):
            tally[k, truth[i], labels[i, k]] += 1
    assert np.array_equal(state.alpha, tally)
    assert state.log and all("free_energy" in e for e in state.log)


def test_train_bccnet_deterministic_and_round_trip():
    x, labels, truth = fusion_problem(seed=1)
    observed = np.where(np.arange(30) % 3 == 0, -1, truth)
    cfg = FusionConfig(epochs_per_step=2, max_iter=4)
    a = train_bccnet(x, labels, observed, cfg, seed=5)
    b = train_bccnet(x, labels, observed, cfg, seed=5)
    assert a.log == b.log
    blob = dumps_weights(a.state())
    assert blob == dumps_weights(b.state())
    back = fusion_from_state(loads_weights(blob)[0], 5, 3)
    assert back.posterior(x, labels).tobytes() == a.posterior(x, labels).tobytes()
    assert dumps_weights(back.state()) == blob


def test_max_iter_warning_recorded():
    x, labels, truth = fusion_problem(seed=2)
    state = train_bccnet(x, labels, np.full(30, -1), FusionConfig(epochs_per_step=1, max_iter=1, tol=0.0))
    assert "max_iter" in state.log[-1]["warning"]


def test_threshold_one_never_alerts():
    x, labels, truth = fusion_problem(seed=3)
    state = train_bccnet(x, labels, truth, FusionConfig(epochs_per_step=1, max_iter=2))
    _, alerts = state.predict(x, labels, threshold=1.0)
    assert not alerts.any()
    post, alerts = state.predict(x, labels)
    assert np.array_equal(alerts, post[:, 1] > 0.5)


def test_symmetric_prior_and_confusions_give_even_posterior():
    x, labels, truth = fusion_problem(seed=4)
    state = train_bccnet(x, labels, truth, FusionConfig(epochs_per_step=1, max_iter=1))
    state.alpha = np.ones((4, 2, 2)) * 3.0
    for layer in state.combiner.layers:
        for v in layer.params.values():
            v[:] = 0.0  # zero logits: sigmoid pair (0.5, 0.5)
    post = state.posterior(x[:3], labels[:3])
    np.testing.assert_allclose(post, 0.5, atol=1e-15)
