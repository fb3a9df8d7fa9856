"""Binary C-SVM trained by sequential minimal optimization.

Working-set selection uses maximal violating pairs with second-order
information; the solver stops once the KKT gap ``m(a) - M(a)`` drops below
``tol``. Probabilities come from Platt's sigmoid fitted to the training
decision values.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, ValidationError
from .base import check_training_set, outputs_from_proba

TAU = 1e-12


def kernel_matrix(a, b, kernel, gamma):
    if kernel == "linear":
        return a @ b.T
    if kernel == "rbf":
        d2 = (a ** 2).sum(1)[:, None] + (b ** 2).sum(1)[None] - 2 * a @ b.T
        return np.exp(-gamma * np.maximum(d2, 0.0))
    raise ValidationError(f"unknown kernel {kernel!r}")


def solve_smo(K, y, C, tol=1e-3, max_iter=100_000):
    """Dual coefficients ``alpha`` and offset ``rho`` for kernel matrix ``K``.

    ``y`` holds labels in {-1, +1}. Raises ConvergenceError after ``max_iter``
    pair updates.
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(Q).copy()
    for it in range(max_iter):
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * G
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        m_up = score[i]
        m_low = score[low].min()
        if m_up - m_low < tol:
            break
        cand = low & (score < m_up)
        b = m_up - score
        a = diag[i] + diag - 2.0 * y[i] * y * Q[i]
        a = np.where(a > 0, a, TAU)
        gain = np.where(cand, -(b ** 2) / a, np.inf)
        j = int(np.argmin(gain))
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(Q[i, i] + Q[j, j] + 2 * Q[i, j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            quad = max(Q[i, i] + Q[j, j] - 2 * Q[i, j], TAU)
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
            elif alpha[j] < 0:
                alpha[j], alpha[i] = 0.0, total
            if total > C:
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, total
        G += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
    else:
        raise ConvergenceError(f"SMO did not reach KKT tolerance {tol} within {max_iter} iterations")
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub = np.where(((y > 0) & (alpha >= C)) | ((y < 0) & (alpha <= 0)), yG, np.inf).min()
        lb = np.where(((y > 0) & (alpha <= 0)) | ((y < 0) & (alpha >= C)), yG, -np.inf).max()
        rho = float((ub + lb) / 2)
    return alpha, rho


def fit_platt(f, y01, max_iter=100):
    """Platt sigmoid ``P(y=1|f) = 1 / (1 + exp(A f + B))`` by Newton with backtracking."""
    n_pos = int(y01.sum())
    n_neg = len(y01) - n_pos
    t = np.where(y01 == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    A, B = 0.0, np.log((n_neg + 1.0) / (n_pos + 1.0))

    def objective(A, B):
        z = A * f + B
        return float(np.sum(t * z + np.logaddexp(0.0, -z)))

    fval = objective(A, B)
    for _ in range(max_iter):
        z = A * f + B
        p = 1.0 / (1.0 + np.exp(np.clip(z, -700, 700)))  # P(y=1)
        d1 = t - p
        d2 = p * (1.0 - p)
        h11 = np.sum(f * f * d2) + 1e-12
        h22 = np.sum(d2) + 1e-12
        h21 = np.sum(f * d2)
        g1 = np.sum(f * d1)
        g2 = np.sum(d1)
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2
        else:
            break
    return float(A), float(B)


@dataclass(frozen=True)
class SVM:
    """Serialized fields: ``support`` (S, D), ``coef`` (S,) = alpha*y, ``rho``,
    ``gamma``, ``kernel`` (0 linear, 1 rbf), ``C``, ``platt`` (A, B)."""

    support: np.ndarray
    coef: np.ndarray
    rho: float
    gamma: float
    kernel: str
    C: float
    platt: tuple

    def decision_function(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if len(self.coef) == 0:
            return np.full(x.shape[0], -self.rho)
        return kernel_matrix(x, self.support, self.kernel, self.gamma) @ self.coef - self.rho

    def predict_proba(self, x):
        A, B = self.platt
        p1 = 1.0 / (1.0 + np.exp(np.clip(A * self.decision_function(x) + B, -700, 700)))
        return np.stack([1.0 - p1, p1], axis=1)

    def predict(self, x):
        return outputs_from_proba("svm", self.predict_proba(x))

    def state(self):
        return {"support": self.support, "coef": self.coef, "rho": np.array(self.rho),
                "gamma": np.array(self.gamma), "kernel": np.array(0.0 if self.kernel == "linear" else 1.0),
                "C": np.array(self.C), "platt": np.array(self.platt)}

    @classmethod
    def from_state(cls, a):
        return cls(a["support"].reshape(-1, a["support"].shape[-1]) if a["support"].size else a["support"],
                   a["coef"], float(a["rho"]), float(a["gamma"]),
                   "linear" if float(a["kernel"]) == 0.0 else "rbf", float(a["C"]), tuple(a["platt"]))


def default_gamma(x):
    var = float(np.asarray(x).var())
    return 1.0 / (x.shape[1] * var) if var > 0 else 1.0


def train_svm(x, y, C=10.0, kernel="rbf", gamma=None, tol=1e-3, max_iter=100_000, return_dual=False):
    x, y01 = check_training_set(x, y)
    gamma = default_gamma(x) if gamma is None else float(gamma)
    ys = np.where(y01 == 1, 1.0, -1.0)
    K = kernel_matrix(x, x, kernel, gamma)
    alpha, rho = solve_smo(K, ys, C, tol, max_iter)
    sv = alpha > 0
    model = SVM(x[sv].copy(), (alpha * ys)[sv], rho, gamma, kernel, float(C), (0.0, 0.0))
    platt = fit_platt(K[:, sv] @ model.coef - rho, y01)
    model = SVM(model.support, model.coef, rho, gamma, kernel, float(C), platt)
    if return_dual:
        return model, alpha
    return model


def dual_objective(alpha, K, y):
    """Dual value ``sum(alpha) - 1/2 alpha^T Q alpha`` (to be maximised)."""
    v = alpha * y
    return float(alpha.sum() - 0.5 * v @ K @ v)


def predict_svm(model, x):
    return model.predict(x)
