"""Exact GP regression with a unit-variance ARD RBF kernel.

The mean function is zero and the output variance is fixed to one; the only
hyperparameters are the per-dimension length scales and the noise standard
deviation, both stored in log space. Observation noise is folded into the
kernel as ``sigma^2 * I[x == x']``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import _backend
from ._kernels_py import jittered_cholesky, rbf
from .errors import InvalidArgumentError

__all__ = [
    "Hyperparameters",
    "Dataset",
    "PredictiveDistribution",
    "kernel_matrix",
    "log_marginal_likelihood",
    "lml_gradient",
    "lml_and_gradient",
    "posterior_predict",
    "nlml_of",
]


@dataclass(frozen=True)
class Hyperparameters:
    """Log length scales (one per input dimension) and log noise std."""

    log_length_scales: np.ndarray
    log_noise_std: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.log_length_scales, dtype=float))
        if ls.ndim != 1 or ls.size == 0:
            raise InvalidArgumentError("log_length_scales must be a non-empty vector")
        object.__setattr__(self, "log_length_scales", ls)
        object.__setattr__(self, "log_noise_std", float(self.log_noise_std))
        if not (np.all(np.isfinite(ls)) and np.isfinite(self.log_noise_std)):
            raise InvalidArgumentError("hyperparameters must be finite")

    @property
    def dim(self):
        return self.log_length_scales.size

    @property
    def length_scales(self):
        return np.exp(self.log_length_scales)

    @property
    def noise_variance(self):
        return float(np.exp(2.0 * self.log_noise_std))

    def to_vector(self):
        return np.append(self.log_length_scales, self.log_noise_std)

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v[:-1], v[-1])


@dataclass(frozen=True)
class Dataset:
    """Training inputs (n x d, unit cube) and standardized targets (n,)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.targets, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] < 1:
            raise InvalidArgumentError("inputs must be an n x d matrix with n >= 1")
        if y.shape[0] != X.shape[0]:
            raise InvalidArgumentError(
                f"{X.shape[0]} inputs but {y.shape[0]} targets"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("dataset contains non-finite entries")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]


@dataclass(frozen=True)
class PredictiveDistribution:
    latent_mean: np.ndarray
    latent_variance: np.ndarray
    observation_variance: np.ndarray


def _check_dim(M, theta, what):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2 or M.shape[1] != theta.dim:
        raise InvalidArgumentError(
            f"{what} has {M.shape[-1]} columns, hyperparameters have d={theta.dim}"
        )
    return M


def kernel_matrix(A, B, theta, include_noise=False):
    """Covariance between the rows of ``A`` and ``B``.

    Noise is added on the diagonal only when ``A`` and ``B`` are the same
    object (or equal arrays), i.e. when row ``i`` and column ``i`` are the
    same point.
    """
    A = _check_dim(A, theta, "A")
    same = B is None or B is A
    B = A if same else _check_dim(B, theta, "B")
    K = rbf(A, B, theta.log_length_scales)
    if not same:
        same = A.shape == B.shape and np.array_equal(A, B)
    if same:
        # exact symmetry despite round-off in the expansion
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
        if include_noise:
            K[np.diag_indices_from(K)] += theta.noise_variance
    return K


def _check_data(data, theta):
    if data.dim != theta.dim:
        raise InvalidArgumentError(
            f"dataset has d={data.dim}, hyperparameters have d={theta.dim}"
        )


def lml_and_gradient(data, theta, with_grad=True):
    """``(log_marginal_likelihood, gradient)``; gradient is ``None`` if not requested."""
    _check_data(data, theta)
    return _backend.lml_and_grad(
        data.inputs, data.targets, theta.log_length_scales, theta.log_noise_std, with_grad
    )


def log_marginal_likelihood(data, theta):
    return lml_and_gradient(data, theta, with_grad=False)[0]


def lml_gradient(data, theta):
    """Gradient of the LML w.r.t. ``[log l_1..log l_d, log sigma]``."""
    return lml_and_gradient(data, theta)[1]


def nlml_of(data, theta):
    return -log_marginal_likelihood(data, theta)


class PosteriorFactor:
    """Cached Cholesky factorization for repeated predictions at one theta."""

    def __init__(self, data, theta):
        _check_data(data, theta)
        self.data = data
        self.theta = theta
        K = kernel_matrix(data.inputs, None, theta, include_noise=True)
        self.L, self.jitter = jittered_cholesky(K)
        z = solve_triangular(self.L, data.targets, lower=True)
        self.alpha = solve_triangular(self.L, z, lower=True, trans="T")

    def predict(self, queries):
        Xq = _check_dim(queries, self.theta, "queries")
        Ks = rbf(Xq, self.data.inputs, self.theta.log_length_scales)
        mean = Ks @ self.alpha
        V = solve_triangular(self.L, Ks.T, lower=True)
        var = 1.0 - np.einsum("ij,ij->j", V, V)
        np.maximum(var, 0.0, out=var)
        return PredictiveDistribution(mean, var, var + self.theta.noise_variance)


def posterior_predict(data, theta, queries):
    """Diagonal predictive posterior at ``queries`` (m x d)."""
    return PosteriorFactor(data, theta).predict(queries)
