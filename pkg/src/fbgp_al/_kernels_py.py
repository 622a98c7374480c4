"""Pure-numpy implementations of the hot GP kernels.

These are the fallback for the compiled ``_kernels`` extension and share its
jitter ladder exactly, so both backends fail on the same inputs.
"""

import math

import numpy as np
from scipy.linalg import cho_solve

from .errors import NumericalError

LOG_2PI = math.log(2.0 * math.pi)

# relative to mean(diag(K)); 0 first, then 1e-8 .. 1e-2
JITTER_LADDER = (0.0,) + tuple(10.0 ** e for e in range(-8, -1))


def jitter_levels(mean_diag):
    return [rel * mean_diag for rel in JITTER_LADDER]


def jittered_cholesky(K):
    """Lower Cholesky factor of ``K``, escalating diagonal jitter on failure.

    Returns ``(L, jitter)`` where ``jitter`` is the absolute amount added.
    """
    n = K.shape[0]
    levels = jitter_levels(float(np.mean(np.diag(K))))
    for jitter in levels:
        try:
            Kj = K + jitter * np.eye(n) if jitter else K
            L = np.linalg.cholesky(Kj)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
    raise NumericalError(
        f"Cholesky failed at maximum jitter {levels[-1]:.3g}", jitter=levels[-1]
    )


def rbf(A, B, log_ls):
    """Unit-variance ARD squared-exponential cross-covariance."""
    ls = np.exp(log_ls)
    As = A / ls
    Bs = B / ls
    sq = (
        np.sum(As**2, axis=1)[:, None]
        + np.sum(Bs**2, axis=1)[None, :]
        - 2.0 * As @ Bs.T
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-0.5 * sq)


def lml_and_grad(X, y, log_ls, log_noise, with_grad=True):
    """Log marginal likelihood and its gradient in log-hyperparameter space.

    The gradient is ordered ``[d/dlog(l_1), ..., d/dlog(l_d), d/dlog(sigma)]``.
    """
    n = X.shape[0]
    ls = np.exp(log_ls)
    noise_var = math.exp(2.0 * log_noise)
    # per-dimension scaled squared distances, shape (d, n, n)
    diff = (X[:, None, :] - X[None, :, :]) / ls
    D = np.moveaxis(diff * diff, -1, 0)
    K0 = np.exp(-0.5 * D.sum(axis=0))
    K = K0 + noise_var * np.eye(n)
    L, _ = jittered_cholesky(K)
    alpha = cho_solve((L, True), y)
    lml = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * LOG_2PI
    if not with_grad:
        return lml, None
    Kinv = cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty(len(log_ls) + 1)
    grad[:-1] = 0.5 * np.einsum("ij,kij->k", W * K0, D)
    grad[-1] = noise_var * np.trace(W)
    return lml, grad
