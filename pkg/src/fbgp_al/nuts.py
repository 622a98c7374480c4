"""No-U-turn Hamiltonian Monte Carlo for smooth targets on R^k.

Multinomial trajectory sampling (biased progressive sampling across subtree
doublings, uniform-by-weight within a subtree), dual-averaging step-size
adaptation toward a target acceptance statistic, and a diagonal inverse
metric estimated from draws in Stan-style expanding warm-up windows.

The target is supplied as ``logp_and_grad(q) -> (logp, grad)``. A target that
raises :class:`~fbgp_al.errors.NumericalError` or returns a non-finite value
is treated as having zero density, so the trajectory terminates as divergent.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

MAX_ENERGY_ERROR = 1000.0


def potential(logp_and_grad, q):
    """``(U, grad U)`` with ``U = -logp``; ``(inf, nan)`` where logp is undefined."""
    try:
        lp, g = logp_and_grad(q)
    except (NumericalError, FloatingPointError):
        return math.inf, np.full_like(q, np.nan)
    if not np.isfinite(lp) or not np.all(np.isfinite(g)):
        return math.inf, np.full_like(q, np.nan)
    return -float(lp), -np.asarray(g, dtype=float)


@dataclass
class DualAveraging:
    """Nesterov dual averaging on log step size (Hoffman & Gelman defaults)."""

    mu: float
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    t: int = 0
    h_bar: float = 0.0
    log_eps: float = 0.0
    log_eps_bar: float = 0.0

    @classmethod
    def start(cls, eps):
        return cls(mu=math.log(10.0 * eps), log_eps=math.log(eps))

    def update(self, accept_stat, target):
        self.t += 1
        eta = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (target - accept_stat)
        self.log_eps = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        w = self.t ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    def final(self):
        return math.exp(self.log_eps_bar)


def warmup_windows(n_warmup):
    """Slow-adaptation windows ``[(start, stop), ...]`` for metric estimation.

    Fast initial buffer, doubling middle windows, fast terminal buffer. Very
    short warm-ups get no metric adaptation.
    """
    if n_warmup < 20:
        return []
    if n_warmup >= 150:
        init_buffer, term_buffer, base = 75, 50, 25
    else:
        init_buffer = int(0.15 * n_warmup)
        term_buffer = int(0.10 * n_warmup)
        base = n_warmup - init_buffer - term_buffer
    start, end = init_buffer, n_warmup - term_buffer
    windows = []
    size = base
    while start < end:
        stop = start + size
        # absorb a trailing window that would be shorter than the next doubling
        if stop + 2 * size > end:
            stop = end
        windows.append((start, stop))
        start = stop
        size *= 2
    return windows


class _Tree:
    """Subtree summary; ``beg``/``end`` are in integration order."""

    __slots__ = (
        "q_end", "p_end", "g_end", "p_beg", "rho",
        "q_prop", "U_prop", "g_prop",
        "log_w", "valid", "diverged", "sum_alpha", "n_leapfrog",
    )


def _no_uturn(inv_mass, p_a, p_b, rho):
    rho_sharp = inv_mass * rho
    return float(p_a @ rho_sharp) > 0.0 and float(p_b @ rho_sharp) > 0.0


class NUTSKernel:
    """One chain's transition kernel; holds step size and inverse metric.

    Termination uses the generalized criterion on the summed momentum of a
    (sub)trajectory, plus the two extra checks across each merge boundary so
    that U-turns straddling adjacent subtrees are not missed.
    """

    def __init__(self, logp_and_grad, rng, max_tree_depth=10,
                 max_energy_error=MAX_ENERGY_ERROR):
        self.logp_and_grad = logp_and_grad
        self.rng = rng
        self.max_tree_depth = int(max_tree_depth)
        self.max_energy_error = float(max_energy_error)
        self.step_size = 1.0
        self.inv_mass = None

    def _leapfrog(self, q, p, g, eps):
        p_half = p - 0.5 * eps * g
        q_new = q + eps * (self.inv_mass * p_half)
        U_new, g_new = potential(self.logp_and_grad, q_new)
        p_new = p_half - 0.5 * eps * g_new
        return q_new, p_new, U_new, g_new

    def _kinetic(self, p):
        return 0.5 * float(p @ (self.inv_mass * p))

    def _sample_momentum(self):
        return self.rng.standard_normal(self.inv_mass.size) / np.sqrt(self.inv_mass)

    def find_reasonable_step_size(self, q, U, g):
        eps = self.step_size
        p = self._sample_momentum()
        H0 = U + self._kinetic(p)

        def log_accept(e):
            _, p1, U1, _ = self._leapfrog(q, p, g, e)
            H1 = U1 + self._kinetic(p1)
            return H0 - H1 if np.isfinite(H1) else -math.inf

        direction = 1.0 if log_accept(eps) > math.log(0.5) else -1.0
        for _ in range(100):
            new = eps * 2.0 ** direction
            la = log_accept(new)
            if (direction > 0 and not la > math.log(0.5)) or (
                direction < 0 and la > math.log(0.5)
            ):
                if direction < 0:
                    eps = new
                break
            eps = new
            if not 1e-8 < eps < 1e3:
                break
        return float(np.clip(eps, 1e-8, 1e3))

    def _build(self, q, p, g, direction, depth, H0):
        if depth == 0:
            q1, p1, U1, g1 = self._leapfrog(q, p, g, direction * self.step_size)
            H1 = U1 + self._kinetic(p1) if np.isfinite(U1) else math.inf
            energy_error = H1 - H0 if np.isfinite(H1) else math.inf
            t = _Tree()
            t.q_end = t.q_prop = q1
            t.p_end = t.p_beg = t.rho = p1
            t.g_end = t.g_prop = g1
            t.U_prop = U1
            t.log_w = -energy_error
            t.diverged = energy_error > self.max_energy_error
            t.valid = not t.diverged
            t.sum_alpha = math.exp(min(0.0, -energy_error))
            t.n_leapfrog = 1
            return t

        left = self._build(q, p, g, direction, depth - 1, H0)
        if not left.valid:
            return left
        right = self._build(left.q_end, left.p_end, left.g_end, direction, depth - 1, H0)
        left.sum_alpha += right.sum_alpha
        left.n_leapfrog += right.n_leapfrog
        if not right.valid:
            left.valid, left.diverged = False, right.diverged
            return left

        t = left
        log_w = np.logaddexp(left.log_w, right.log_w)
        if math.log(self.rng.random()) < right.log_w - log_w:
            t.q_prop, t.U_prop, t.g_prop = right.q_prop, right.U_prop, right.g_prop
        t.log_w = log_w
        rho_left = left.rho
        t.rho = rho_left + right.rho
        inv_mass = self.inv_mass
        t.valid = (
            _no_uturn(inv_mass, left.p_beg, right.p_end, t.rho)
            and _no_uturn(inv_mass, left.p_beg, right.p_beg, rho_left + right.p_beg)
            and _no_uturn(inv_mass, left.p_end, right.p_end, right.rho + left.p_end)
        )
        t.q_end, t.p_end, t.g_end = right.q_end, right.p_end, right.g_end
        return t

    def transition(self, q, U, g):
        """One NUTS step from ``q``. Returns ``(q, U, g, info)``."""
        p = self._sample_momentum()
        H0 = U + self._kinetic(p)
        # outer edges of the whole trajectory, forward and backward in time
        q_fwd = q_bck = q
        p_fwd = p_bck = p
        g_fwd = g_bck = g
        rho = p
        q_prop, U_prop, g_prop = q, U, g
        log_w = 0.0
        sum_alpha, n_leapfrog = 0.0, 0
        diverged = False
        depth = 0
        inv_mass = self.inv_mass
        while depth < self.max_tree_depth:
            forward = self.rng.random() < 0.5
            if forward:
                t = self._build(q_fwd, p_fwd, g_fwd, 1, depth, H0)
            else:
                t = self._build(q_bck, p_bck, g_bck, -1, depth, H0)
            depth += 1
            sum_alpha += t.sum_alpha
            n_leapfrog += t.n_leapfrog
            if not t.valid:
                diverged = t.diverged
                break
            # biased progressive sampling favors the newer subtree
            if math.log(self.rng.random()) < t.log_w - log_w:
                q_prop, U_prop, g_prop = t.q_prop, t.U_prop, t.g_prop
            log_w = np.logaddexp(log_w, t.log_w)
            rho_old = rho
            rho = rho_old + t.rho
            if forward:
                p_old_edge = p_fwd
                q_fwd, p_fwd, g_fwd = t.q_end, t.p_end, t.g_end
                outer = p_bck
            else:
                p_old_edge = p_bck
                q_bck, p_bck, g_bck = t.q_end, t.p_end, t.g_end
                outer = p_fwd
            if not (
                _no_uturn(inv_mass, outer, t.p_end, rho)
                and _no_uturn(inv_mass, outer, t.p_beg, rho_old + t.p_beg)
                and _no_uturn(inv_mass, p_old_edge, t.p_end, t.rho + p_old_edge)
            ):
                break
        info = {
            "accept_stat": sum_alpha / max(n_leapfrog, 1),
            "diverged": diverged,
            "tree_depth": depth,
            "n_leapfrog": n_leapfrog,
        }
        return q_prop, U_prop, g_prop, info


@dataclass
class ChainResult:
    draws: np.ndarray
    accept_stats: np.ndarray
    divergent: np.ndarray
    tree_depths: np.ndarray
    step_size: float
    inv_mass: np.ndarray
    warmup_divergences: int


def run_chain(logp_and_grad, init, n_warmup, n_samples, rng,
              target_accept=0.8, max_tree_depth=10):
    """Warm up and sample a single chain starting from ``init``.

    Returns only the ``n_samples`` post-warm-up draws.
    """
    q = np.array(init, dtype=float)
    dim = q.size
    U, g = potential(logp_and_grad, q)
    if not np.isfinite(U):
        raise NumericalError("log density is undefined at the initial point")

    kernel = NUTSKernel(logp_and_grad, rng, max_tree_depth=max_tree_depth)
    kernel.inv_mass = np.ones(dim)
    kernel.step_size = kernel.find_reasonable_step_size(q, U, g)
    da = DualAveraging.start(kernel.step_size)

    windows = warmup_windows(n_warmup)
    window_ends = {stop: start for start, stop in windows}
    buffer = []
    warmup_div = 0
    for it in range(n_warmup):
        q, U, g, info = kernel.transition(q, U, g)
        warmup_div += info["diverged"]
        kernel.step_size = da.update(info["accept_stat"], target_accept)
        if any(start <= it < stop for start, stop in windows):
            buffer.append(q)
        if (it + 1) in window_ends:
            samples = np.asarray(buffer)
            n = samples.shape[0]
            var = samples.var(axis=0, ddof=1) if n > 1 else np.ones(dim)
            # shrink toward a small multiple of identity for short windows
            kernel.inv_mass = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            buffer = []
            kernel.step_size = kernel.find_reasonable_step_size(q, U, g)
            da = DualAveraging.start(kernel.step_size)
    if n_warmup > 0:
        kernel.step_size = da.final()

    draws = np.empty((n_samples, dim))
    accept = np.empty(n_samples)
    divergent = np.zeros(n_samples, dtype=bool)
    depths = np.empty(n_samples, dtype=int)
    for i in range(n_samples):
        q, U, g, info = kernel.transition(q, U, g)
        draws[i] = q
        accept[i] = info["accept_stat"]
        divergent[i] = info["diverged"]
        depths[i] = info["tree_depth"]
    return ChainResult(draws, accept, divergent, depths, kernel.step_size,
                       kernel.inv_mass.copy(), warmup_div)
