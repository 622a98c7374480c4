# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled log marginal likelihood + gradient for the ARD RBF GP.

Mirrors ``_kernels_py.lml_and_grad`` (same jitter ladder, same gradient
ordering). Sizes here are small (tens of points), so plain loops beat the
per-call overhead of numpy/LAPACK by a wide margin.
"""

import numpy as np

from libc.math cimport exp, log, sqrt, isfinite, M_PI

from .errors import NumericalError
from ._kernels_py import JITTER_LADDER


cdef int _cholesky(double[:, ::1] K, double[:, ::1] L, Py_ssize_t n, double jitter) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double s, ljj
    for j in range(n):
        s = K[j, j] + jitter
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not (s > 0.0) or not isfinite(s):
            return 1
        ljj = sqrt(s)
        L[j, j] = ljj
        for i in range(j + 1, n):
            s = K[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / ljj
    return 0


cdef void _lower_inverse(double[:, ::1] L, double[:, ::1] Li, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(n):
        for j in range(n):
            Li[i, j] = 0.0
    for j in range(n):
        Li[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j, i):
                s -= L[i, k] * Li[k, j]
            Li[i, j] = s / L[i, i]


def lml_and_grad(const double[:, ::1] X, const double[::1] y,
                 const double[::1] log_ls, double log_noise, bint with_grad=True):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t i, j, k, level
    cdef double s, diff, noise_var = exp(2.0 * log_noise)
    cdef double mean_diag = 1.0 + noise_var
    cdef double lml, w, jitter = 0.0
    cdef int failed = 1

    inv_ls2_arr = np.empty(d)
    K0_arr = np.empty((n, n))
    K_arr = np.empty((n, n))
    L_arr = np.zeros((n, n))
    alpha_arr = np.empty(n)
    cdef double[::1] inv_ls2 = inv_ls2_arr
    cdef double[:, ::1] K0 = K0_arr
    cdef double[:, ::1] K = K_arr
    cdef double[:, ::1] L = L_arr
    cdef double[::1] alpha = alpha_arr

    cdef double[::1] ladder = np.asarray(JITTER_LADDER, dtype=np.float64)
    cdef Py_ssize_t n_levels = ladder.shape[0]

    with nogil:
        for k in range(d):
            inv_ls2[k] = exp(-2.0 * log_ls[k])
        for i in range(n):
            K0[i, i] = 1.0
            for j in range(i):
                s = 0.0
                for k in range(d):
                    diff = X[i, k] - X[j, k]
                    s += diff * diff * inv_ls2[k]
                s = exp(-0.5 * s)
                K0[i, j] = s
                K0[j, i] = s
        for i in range(n):
            for j in range(n):
                K[i, j] = K0[i, j]
            K[i, i] += noise_var
        for level in range(n_levels):
            jitter = ladder[level] * mean_diag
            if _cholesky(K, L, n, jitter) == 0:
                failed = 0
                break

    if failed:
        raise NumericalError(
            f"Cholesky failed at maximum jitter {jitter:.3g}", jitter=jitter
        )

    cdef double logdet = 0.0, quad = 0.0
    with nogil:
        # forward then backward substitution for alpha = K^-1 y
        for i in range(n):
            s = y[i]
            for k in range(i):
                s -= L[i, k] * alpha[k]
            alpha[i] = s / L[i, i]
        for i in range(n - 1, -1, -1):
            s = alpha[i]
            for k in range(i + 1, n):
                s -= L[k, i] * alpha[k]
            alpha[i] = s / L[i, i]
        for i in range(n):
            logdet += log(L[i, i])
            quad += y[i] * alpha[i]
    lml = -0.5 * quad - logdet - 0.5 * n * log(2.0 * M_PI)
    if not with_grad:
        return lml, None

    Li_arr = np.empty((n, n))
    grad_arr = np.zeros(d + 1)
    cdef double[:, ::1] Li = Li_arr
    cdef double[::1] grad = grad_arr
    cdef double trace_w = 0.0
    with nogil:
        _lower_inverse(L, Li, n)
        # W = alpha alpha^T - K^-1, with K^-1 = Li^T Li; reuse K as W storage
        for i in range(n):
            for j in range(i + 1):
                s = 0.0
                for k in range(i, n):
                    s += Li[k, i] * Li[k, j]
                w = alpha[i] * alpha[j] - s
                K[i, j] = w
                K[j, i] = w
        for i in range(n):
            trace_w += K[i, i]
            for j in range(i):
                w = K[i, j] * K0[i, j]
                for k in range(d):
                    diff = X[i, k] - X[j, k]
                    # off-diagonal pairs counted twice, times the 1/2 prefactor
                    grad[k] += w * diff * diff * inv_ls2[k]
        grad[d] = noise_var * trace_w
    return lml, grad_arr
