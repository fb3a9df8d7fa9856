r"""Bayesian classifier combination with Dirichlet confusion matrices.

Generative model for sample ``i`` and base classifier ``k``::

    t_i ~ Categorical(rho_i)              per-sample prior (neural combiner output)
    pi^k_t ~ Dirichlet(alpha0^k_t)         row t of classifier k's confusion matrix
    c_ik | t_i ~ Categorical(pi^k_{t_i})   hard label emitted by classifier k

Mean-field posterior ``q(t) q(pi)`` with coordinate updates::

    E-step   q_i(t) ∝ rho_i(t) * exp( sum_k E[log pi^k_{t, c_ik}] )
             E[log pi^k_{t,c}] = digamma(alpha^k_{t,c}) - digamma(sum_c' alpha^k_{t,c'})
    M-step   alpha^k_{t,c} = alpha0^k_{t,c} + sum_i q_i(t) [c_ik = c]

Each update maximises the evidence lower bound ``free_energy`` over one
factor, so the bound never decreases while ``rho`` is held fixed.
"""

import numpy as np
from scipy.special import digamma, gammaln, logsumexp

from ..errors import NumericalError

N_CLASSES = 2


def default_prior(n_classifiers, diagonal=2.0, off_diagonal=1.0):
    a = np.full((N_CLASSES, N_CLASSES), off_diagonal)
    np.fill_diagonal(a, diagonal)
    return np.broadcast_to(a, (n_classifiers, N_CLASSES, N_CLASSES)).copy()


def expected_log_confusion(alpha):
    return digamma(alpha) - digamma(alpha.sum(axis=2, keepdims=True))


def _safe_log(p):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(p, dtype=np.float64))


def _label_terms(log_conf, base_labels):
    """``(N, T)`` sum over classifiers of ``log_conf[k, t, c_ik]``."""
    base_labels = np.asarray(base_labels, dtype=np.int64)
    k_idx = np.arange(log_conf.shape[0])[None, :]
    per = log_conf.transpose(0, 2, 1)[k_idx, base_labels]  # (N, K, T)
    return per.sum(axis=1)


def e_step_log(log_prior, base_labels, log_conf):
    """Label posterior from log prior ``(N, T)`` and (expected) log confusions ``(K, T, C)``."""
    scores = np.asarray(log_prior, dtype=np.float64) + _label_terms(log_conf, base_labels)
    top = scores.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise NumericalError("E-step: a sample has zero unnormalised mass for every class")
    return np.exp(scores - logsumexp(scores, axis=1, keepdims=True))


def e_step(nn_probs, base_labels, alpha):
    return e_step_log(_safe_log(nn_probs), base_labels, expected_log_confusion(alpha))


def m_step_confusion(q, base_labels, alpha0):
    q = np.asarray(q, dtype=np.float64).reshape(-1, N_CLASSES)
    base_labels = np.asarray(base_labels, dtype=np.int64)
    alpha0 = np.asarray(alpha0, dtype=np.float64)
    if base_labels.ndim == 1:
        base_labels = base_labels[:, None]
    onehot = np.eye(N_CLASSES)[base_labels]  # (N, K, C)
    counts = np.einsum("it,ikc->ktc", q, onehot)
    if alpha0.ndim == 2:
        alpha0 = np.broadcast_to(alpha0, counts.shape)
    return alpha0 + counts


def dirichlet_kl(alpha, alpha0):
    """KL(Dir(alpha) || Dir(alpha0)) along the last axis."""
    a_sum = alpha.sum(axis=-1)
    return (gammaln(a_sum) - gammaln(alpha).sum(axis=-1)
            - gammaln(alpha0.sum(axis=-1)) + gammaln(alpha0).sum(axis=-1)
            + ((alpha - alpha0) * (digamma(alpha) - digamma(a_sum)[..., None])).sum(axis=-1))


def free_energy(q, base_labels, alpha, alpha0, nn_probs):
    """Evidence lower bound for the label and confusion factors, prior held fixed."""
    q = np.asarray(q, dtype=np.float64)
    log_prior = _safe_log(nn_probs)
    with np.errstate(invalid="ignore"):
        expected = np.where(q > 0, q * (log_prior + _label_terms(expected_log_confusion(alpha), base_labels)), 0.0)
        entropy = -np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0)), 0.0)
    return float(expected.sum() + entropy.sum() - dirichlet_kl(alpha, np.broadcast_to(alpha0, alpha.shape)).sum())


def vote_init(base_labels):
    """Soft majority vote used to start EM on unlabelled samples."""
    votes = np.eye(N_CLASSES)[np.asarray(base_labels, dtype=np.int64)].sum(axis=1) + 1.0
    return votes / votes.sum(axis=1, keepdims=True)


def clamp(q, observed):
    """Overwrite rows with an observed label (0/1); entries < 0 are left free."""
    observed = np.asarray(observed)
    mask = observed >= 0
    if mask.any():
        q = q.copy()
        q[mask] = np.eye(N_CLASSES)[observed[mask]]
    return q


def run_bcc(base_labels, nn_probs=None, alpha0=None, observed=None, max_iter=50, tol=1e-4, q_init=None):
    """Alternate M (confusion) and E (labels) steps with a fixed prior.

    Returns ``(q, alpha, trace)`` where ``trace`` lists the free energy after
    every half-step.
    """
    base_labels = np.asarray(base_labels, dtype=np.int64)
    n, k = base_labels.shape
    nn_probs = np.full((n, N_CLASSES), 1.0 / N_CLASSES) if nn_probs is None else np.asarray(nn_probs)
    alpha0 = default_prior(k) if alpha0 is None else np.broadcast_to(alpha0, (k, N_CLASSES, N_CLASSES))
    observed = np.full(n, -1) if observed is None else np.asarray(observed)
    q = clamp(vote_init(base_labels) if q_init is None else q_init, observed)
    trace = []
    alpha = alpha0
    for _ in range(max_iter):
        alpha = m_step_confusion(q, base_labels, alpha0)
        trace.append(free_energy(q, base_labels, alpha, alpha0, nn_probs))
        q_new = clamp(e_step(nn_probs, base_labels, alpha), observed)
        trace.append(free_energy(q_new, base_labels, alpha, alpha0, nn_probs))
        change = 0.5 * np.abs(q_new - q).sum(axis=1).max() if n else 0.0
        q = q_new
        if change < tol:
            break
    return q, alpha, trace


def posterior_mean_confusion(alpha):
    return alpha / alpha.sum(axis=2, keepdims=True)
