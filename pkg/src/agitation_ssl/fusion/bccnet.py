"""Neural combiner trained inside variational EM (BCCNet-style fusion).

The combiner reads the frozen ``(171, 128)`` feature sequence and supplies
the per-sample class prior ``rho_i`` of the BCC model; the confusion
posteriors of the base classifiers and the label posteriors ``q`` are
updated around it. Labelled samples have ``q`` clamped to their label.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError
from ..nn import LSTM, Dense, Flatten, Optimizer, OptimizerSpec, PairNormalize, ReLU, Sequential, Sigmoid
from ..nn.train import fit, predict
from ..rng import derive_seed, stream
from .bcc import clamp, default_prior, e_step, free_energy, m_step_confusion, vote_init

HIDDEN = 128


@dataclass(frozen=True)
class FusionConfig:
    prior_diagonal: float = 2.0
    prior_off_diagonal: float = 1.0
    l2: float = 1e-4
    max_iter: int = 50
    tol: float = 1e-4
    epochs_per_step: int = 10
    learning_rate: float = 1e-3
    batch_size: int = 32
    threshold: float = 0.5


def build_combiner(seq_len, features, seed, l2=1e-4):
    """LSTM(128) -> dense 128 ReLU (L2) -> flatten -> dense 2 sigmoid, renormalized."""
    rng = stream(seed, "combiner", "init")
    return Sequential([
        LSTM(features, HIDDEN, rng, return_sequences=True),
        Dense(HIDDEN, HIDDEN, rng, l2=l2), ReLU(),
        Flatten(),
        Dense(seq_len * HIDDEN, 2, rng), Sigmoid(), PairNormalize(),
    ])


def m_step_network(combiner, sequences, q, epochs, seed, learning_rate=1e-3, batch_size=32, optimizer=None):
    """Soft-target cross-entropy epochs on the combiner; returns the loss history."""
    if epochs == 0:
        return []
    opt = optimizer or Optimizer(OptimizerSpec("adam", learning_rate))
    return fit(combiner, sequences, q, "cce", opt, epochs, batch_size, seed)


@dataclass
class FusionState:
    alpha: np.ndarray  # (K, 2, 2) Dirichlet parameters
    alpha0: np.ndarray
    combiner: Sequential
    threshold: float
    config_hash: str = ""
    log: list = field(default_factory=list)

    def prior(self, sequences):
        return predict(self.combiner, sequences, 64)

    def posterior(self, sequences, base_labels):
        return e_step(self.prior(sequences), base_labels, self.alpha)

    def predict(self, sequences, base_labels, threshold=None):
        post = self.posterior(sequences, base_labels)
        t = self.threshold if threshold is None else threshold
        return post, post[:, 1] > t

    def state(self):
        arrays = {f"combiner.{k}": v for k, v in self.combiner.named_params().items()}
        arrays["alpha"] = self.alpha
        arrays["alpha0"] = self.alpha0
        arrays["threshold"] = np.array(self.threshold)
        return arrays


def train_bccnet(sequences, base_labels, observed, config=FusionConfig(), seed=0):
    """Variational EM over labels, confusion posteriors and the combiner.

    ``observed`` holds 0/1 for labelled samples and -1 for free ones. Stops
    when the largest per-sample total-variation change of ``q`` falls below
    ``config.tol`` or after ``config.max_iter`` iterations; if the combiner
    diverges the best state so far is kept and the log records why.
    """
    sequences = np.asarray(sequences, dtype=np.float64)
    base_labels = np.asarray(base_labels, dtype=np.int64)
    observed = np.asarray(observed, dtype=np.int64)
    n, k = base_labels.shape
    combiner = build_combiner(sequences.shape[1], sequences.shape[2], seed, config.l2)
    alpha0 = default_prior(k, config.prior_diagonal, config.prior_off_diagonal)
    opt = Optimizer(OptimizerSpec("adam", config.learning_rate))
    nn_probs = predict(combiner, sequences, 64)
    q = clamp(vote_init(base_labels), observed)
    alpha = alpha0
    log = []
    converged = False
    for it in range(config.max_iter):
        alpha = m_step_confusion(q, base_labels, alpha0)
        q_new = clamp(e_step(nn_probs, base_labels, alpha), observed)
        change = float(0.5 * np.abs(q_new - q).sum(axis=1).max()) if n else 0.0
        q = q_new
        entry = {"iteration": it + 1, "free_energy": free_energy(q, base_labels, alpha, alpha0, nn_probs),
                 "q_change": change}
        snapshot = combiner.state_dict()
        try:
            losses = m_step_network(combiner, sequences, q, config.epochs_per_step,
                                    derive_seed(seed, "combiner", "batches", it),
                                    config.learning_rate, config.batch_size, opt)
        except NumericalError as exc:
            combiner.load_state_dict(snapshot)
            entry["warning"] = f"combiner update aborted: {exc}"
            log.append(entry)
            break
        entry["combiner_loss"] = losses[-1] if losses else None
        nn_probs = predict(combiner, sequences, 64)
        log.append(entry)
        if change < config.tol:
            converged = True
            break
    if not converged and log and "warning" not in log[-1]:
        log[-1]["warning"] = f"EM stopped at max_iter={config.max_iter} before q settled"
    return FusionState(alpha, alpha0, combiner, config.threshold, log=log)


def fusion_from_state(arrays, seq_len, features, config_hash="", log=None):
    """Rebuild a FusionState from ``FusionState.state()`` arrays."""
    combiner = build_combiner(seq_len, features, 0)
    combiner.load_state_dict({k[9:]: v for k, v in arrays.items() if k.startswith("combiner.")})
    return FusionState(arrays["alpha"].copy(), arrays["alpha0"].copy(), combiner, float(arrays["threshold"]),
                       config_hash, list(log or []))
