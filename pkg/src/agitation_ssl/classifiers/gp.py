"""Binary Gaussian process classifier, logistic likelihood, Laplace approximation.

Kernel: ``sigma0^2 + x . x'`` (dot product) plus white noise on matching
points. The posterior mode is found by Newton's method in the numerically
stable ``B = I + W^1/2 K W^1/2`` form; predictions integrate the logistic
link against the Gaussian latent with the probit-style approximation
``sigmoid(mean / sqrt(1 + pi * var / 8))``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import expit, log_expit

from ..errors import ConvergenceError
from .base import check_training_set, outputs_from_proba


def dot_product_kernel(a, b, sigma0=1.0):
    return sigma0 ** 2 + a @ b.T


def laplace_objective(f, K, y):
    """Unnormalized log posterior ``sum log sigmoid(y f) - 1/2 f^T K^-1 f``."""
    return float(np.sum(log_expit(y * f)) - 0.5 * f @ np.linalg.solve(K, f))


def find_mode(K, y, tol=1e-6, max_iter=100):
    """Newton iterations for the posterior mode; ``y`` in {-1, +1}.

    Returns ``(f, a)`` with ``a = K^-1 f``. Halves the step whenever the
    objective fails to increase.
    """
    n = len(y)
    t = (y + 1) / 2
    f = np.zeros(n)
    a = np.zeros(n)
    psi = float(np.sum(log_expit(y * f)))
    trace = [psi]
    for _ in range(max_iter):
        pi = expit(f)
        sw = np.sqrt(pi * (1 - pi))
        L = cholesky(np.eye(n) + sw[:, None] * K * sw[None, :], lower=True)
        b = pi * (1 - pi) * f + (t - pi)
        a_new = b - sw * cho_solve((L, True), sw * (K @ b))
        for _ in range(30):
            f_new = K @ a_new
            psi_new = float(np.sum(log_expit(y * f_new)) - 0.5 * a_new @ f_new)
            if psi_new >= psi - 1e-12:
                break
            a_new = 0.5 * (a + a_new)
        a, f, psi = a_new, f_new, psi_new
        trace.append(psi)
        grad = (t - expit(f)) - a
        if not np.all(np.isfinite(grad)):
            raise ConvergenceError("Laplace Newton iterates became non-finite", trace)
        if np.linalg.norm(grad) < tol:
            return f, a
    raise ConvergenceError(f"Laplace Newton did not reach gradient norm {tol} in {max_iter} iterations", trace)


@dataclass(frozen=True)
class GaussianProcessClassifier:
    """Serialized fields: ``x`` (N, D), ``grad`` (N,) = t - sigmoid(f_hat),
    ``sqrt_w`` (N,), ``chol`` (N, N) lower factor of B, ``sigma0``, ``noise``."""

    x: np.ndarray
    grad: np.ndarray
    sqrt_w: np.ndarray
    chol: np.ndarray
    sigma0: float
    noise: float

    def latent(self, q):
        q = np.atleast_2d(np.asarray(q, dtype=np.float64))
        ks = dot_product_kernel(self.x, q, self.sigma0)  # (N, M)
        mean = ks.T @ self.grad
        v = solve_triangular(self.chol, self.sqrt_w[:, None] * ks, lower=True)
        kss = self.sigma0 ** 2 + (q * q).sum(axis=1) + self.noise
        var = np.maximum(kss - (v * v).sum(axis=0), 0.0)
        return mean, var

    def predict_proba(self, q):
        mean, var = self.latent(q)
        p1 = expit(mean / np.sqrt(1.0 + np.pi * var / 8.0))
        return np.stack([1.0 - p1, p1], axis=1)

    def predict(self, q):
        return outputs_from_proba("gp", self.predict_proba(q))

    def state(self):
        return {"x": self.x, "grad": self.grad, "sqrt_w": self.sqrt_w, "chol": self.chol,
                "sigma0": np.array(self.sigma0), "noise": np.array(self.noise)}

    @classmethod
    def from_state(cls, a):
        return cls(a["x"], a["grad"], a["sqrt_w"], a["chol"], float(a["sigma0"]), float(a["noise"]))


def train_gp(x, y, sigma0=1.0, noise=1e-3, tol=1e-6, max_iter=100):
    x, y01 = check_training_set(x, y)
    ys = np.where(y01 == 1, 1.0, -1.0)
    n = x.shape[0]
    K = dot_product_kernel(x, x, sigma0) + noise * np.eye(n)
    f, _ = find_mode(K, ys, tol, max_iter)
    pi = expit(f)
    sw = np.sqrt(pi * (1 - pi))
    L = cholesky(np.eye(n) + sw[:, None] * K * sw[None, :], lower=True)
    return GaussianProcessClassifier(x.copy(), (y01 - pi), sw, L, float(sigma0), float(noise))


def predict_gp(model, x):
    return model.predict(x)
