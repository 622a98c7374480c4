"""Seed-pinned oracle and property checks, runnable from the command line.

Each suite returns a list of :class:`Check`. Suites that touch the GP
kernel accept a ``kernel`` argument (``lml_and_grad`` signature) so that a
deliberately broken kernel can be checked against the same oracles.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _backend, acquisition, evaluation, simulators
from ._motorcycle import MEAN as MOTO_MEAN, STDDEV as MOTO_STD
from .errors import NumericalError
from .gp_core import Dataset, Hyperparameters, posterior_predict
from .mcmc import PriorSpec, SamplerConfig, sample_target


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.suite}: {self.name} ({self.detail})"


def random_gp_instance(rng, max_n=20, max_d=6):
    n = int(rng.integers(2, max_n + 1))
    d = int(rng.integers(1, max_d + 1))
    X = rng.random((n, d))
    y = rng.standard_normal(n)
    theta = Hyperparameters(rng.uniform(-1.5, 1.0, d), float(rng.uniform(-3.0, -0.5)))
    return Dataset(X, y), theta


def dense_oracle(X, y, theta, Xq):
    """Explicit-inverse GP formulas, independent of the Cholesky path."""
    ls = theta.length_scales

    def k(A, B):
        diff = (A[:, None, :] - B[None, :, :]) / ls
        return np.exp(-0.5 * np.sum(diff**2, axis=-1))

    n = X.shape[0]
    K = k(X, X) + theta.noise_variance * np.eye(n)
    Kinv = np.linalg.inv(K)
    _, logdet = np.linalg.slogdet(K)
    lml = -0.5 * y @ Kinv @ y - 0.5 * logdet - 0.5 * n * math.log(2 * math.pi)
    Ks = k(Xq, X)
    mean = Ks @ Kinv @ y
    var = 1.0 - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks)
    return lml, mean, var


def _rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-8))


def central_difference(f, v, h=1e-5):
    g = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        g[i] = (f(v + e) - f(v - e)) / (2 * h)
    return g


def suite_gradients(seed=0, kernel=None, instances=50, tol=1e-5):
    kernel = kernel or _backend.lml_and_grad
    prior = PriorSpec()
    rng = np.random.default_rng(seed)
    worst_lml = worst_post = 0.0
    errors = 0
    for _ in range(instances):
        data, theta = random_gp_instance(rng)
        v = theta.to_vector()
        try:
            a, b = _gradient_errors(kernel, prior, data, v)
        except NumericalError:
            errors += 1
            continue
        worst_lml, worst_post = max(worst_lml, a), max(worst_post, b)
    note = f", {errors} numerical failures" if errors else ""
    return [
        Check("gradients", "lml gradient vs central differences", worst_lml < tol and not errors,
              f"max rel err {worst_lml:.2e}{note}"),
        Check("gradients", "log posterior gradient vs central differences",
              worst_post < tol and not errors, f"max rel err {worst_post:.2e}{note}"),
    ]


def _gradient_errors(kernel, prior, data, v):
    def lml(w):
        return kernel(data.inputs, data.targets, w[:-1], w[-1], False)[0]

    g = kernel(data.inputs, data.targets, v[:-1], v[-1], True)[1]
    fd = central_difference(lml, v)
    fdp = central_difference(lambda w: lml(w) + prior.logpdf(w), v)
    return _rel_err(g, fd), _rel_err(g + prior.grad_logpdf(v), fdp)


def suite_gp(seed=0, kernel=None, instances=50, tol=1e-8):
    kernel = kernel or _backend.lml_and_grad
    rng = np.random.default_rng(seed)
    err_lml = err_mean = err_var = 0.0
    for _ in range(instances):
        data, theta = random_gp_instance(rng)
        Xq = rng.random((10, data.dim))
        lml_o, mean_o, var_o = dense_oracle(data.inputs, data.targets, theta, Xq)
        lml = kernel(data.inputs, data.targets, theta.log_length_scales,
                     theta.log_noise_std, False)[0]
        pred = posterior_predict(data, theta, Xq)
        err_lml = max(err_lml, abs(lml - lml_o) / max(1.0, abs(lml_o)))
        err_mean = max(err_mean, float(np.max(np.abs(pred.latent_mean - mean_o))))
        err_var = max(err_var, float(np.max(np.abs(pred.latent_variance - np.maximum(var_o, 0)))))
    return [
        Check("gp", "log marginal likelihood vs dense oracle", err_lml < tol, f"{err_lml:.2e}"),
        Check("gp", "predictive mean vs dense oracle", err_mean < tol, f"{err_mean:.2e}"),
        Check("gp", "predictive variance vs dense oracle", err_var < tol, f"{err_var:.2e}"),
    ]


def random_ensemble(rng, M=None, P=None):
    M = M or int(rng.integers(2, 30))
    P = P or int(rng.integers(1, 20))
    means = rng.normal(0.0, rng.uniform(0.1, 3.0), (M, P))
    lat = rng.uniform(0.0, 2.0, (M, P))
    obs = lat + rng.uniform(1e-4, 0.5, (M, 1))
    return acquisition.EnsemblePrediction(means, lat, obs)


def suite_mixture(seed=0, ensembles=20, draws=1_000_000):
    rng = np.random.default_rng(seed)
    worst_z = worst_identity = 0.0
    for _ in range(ensembles):
        ens = random_ensemble(rng, P=1)
        mom = acquisition.mixture_moments(ens)
        mu, s2 = ens.means[:, 0], ens.observation_variances[:, 0]
        comp = rng.integers(mu.size, size=draws)
        x = mu[comp] + np.sqrt(s2[comp]) * rng.standard_normal(draws)
        m_hat, v_hat = x.mean(), x.var()
        se_m = math.sqrt(v_hat / draws)
        se_v = math.sqrt(np.mean((x - m_hat) ** 4) - v_hat**2) / math.sqrt(draws)
        worst_z = max(worst_z, abs(m_hat - mom.mixture_mean[0]) / se_m,
                      abs(v_hat - mom.mixture_variance[0]) / se_v)
        total = s2.mean() + np.mean((mu - mu.mean()) ** 2)
        worst_identity = max(worst_identity, abs(total - mom.mixture_variance[0]))
    return [
        Check("mixture", "moments vs Monte Carlo within 3 standard errors", worst_z < 3.0,
              f"max |z| {worst_z:.2f}"),
        Check("mixture", "variance decomposition identity", worst_identity < 1e-12,
              f"{worst_identity:.1e}"),
    ]


def suite_acquisition(seed=0, ensembles=1000):
    rng = np.random.default_rng(seed)
    err_sum = err_mix = 0.0
    min_bald = math.inf
    for _ in range(ensembles):
        ens = random_ensemble(rng)
        q = acquisition.score_qb_mgp(ens).scores
        parts = acquisition.score_b_alm(ens).scores + acquisition.score_b_qbc(ens).scores
        err_sum = max(err_sum, float(np.max(np.abs(q - parts))))
        err_mix = max(err_mix, float(np.max(np.abs(q - acquisition.mixture_moments(ens).mixture_variance))))
        min_bald = min(min_bald, float(acquisition.score_bald(ens).scores.min()))
    same = acquisition.EnsemblePrediction(np.ones((4, 5)), np.full((4, 5), 0.3), np.full((4, 5), 0.5))
    bald_same = float(np.max(np.abs(acquisition.score_bald(same).scores)))
    # two unit-variance draws with means -1 and +1: mixture variance 2
    hand = acquisition.EnsemblePrediction(np.array([[-1.0], [1.0]]), np.ones((2, 1)), np.ones((2, 1)))
    bald_hand = float(acquisition.score_bald(hand).scores[0])
    return [
        Check("acquisition", "QB-MGP = B-ALM + B-QBC", err_sum < 1e-12, f"{err_sum:.1e}"),
        Check("acquisition", "QB-MGP = mixture variance", err_mix < 1e-12, f"{err_mix:.1e}"),
        Check("acquisition", "BALD non-negative", min_bald >= -1e-10, f"min {min_bald:.2e}"),
        Check("acquisition", "BALD zero for identical draws", bald_same == 0.0, f"{bald_same:.1e}"),
        Check("acquisition", "BALD two-component hand case", abs(bald_hand - 0.5 * math.log(2)) < 1e-12,
              f"{bald_hand:.15f}"),
    ]


class GaussianTarget:
    """Log density and gradient of a zero-mean multivariate Normal."""

    def __init__(self, cov):
        self.prec = np.linalg.inv(np.asarray(cov, dtype=float))

    def __call__(self, q):
        g = -self.prec @ q
        return 0.5 * float(q @ g), g


def sample_gaussian(cov, config):
    cov = np.atleast_2d(cov)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1 << 20,)))
    inits = rng.standard_normal((config.chains, cov.shape[0]))
    return sample_target(GaussianTarget(cov), inits, config).draws


def suite_sampler(seed=0):
    cfg = SamplerConfig(seed=seed)
    std = sample_gaussian(np.eye(2), cfg)
    mean_err = float(np.max(np.abs(std.mean(axis=0))))
    cov_err = float(np.max(np.abs(np.cov(std.T) - np.eye(2))))
    rho = 0.9
    corr_draws = sample_gaussian([[1.0, rho], [rho, 1.0]], cfg)
    corr_err = abs(float(np.corrcoef(corr_draws.T)[0, 1]) - rho)
    one = sample_gaussian(np.eye(1), cfg)[:, 0]
    ks_p = float(stats.kstest(one, "norm").pvalue)
    return [
        Check("sampler", "standard Normal mean within 0.1", mean_err < 0.1, f"{mean_err:.3f}"),
        Check("sampler", "standard Normal covariance within 0.15", cov_err < 0.15, f"{cov_err:.3f}"),
        Check("sampler", "correlated Normal correlation within 0.1", corr_err < 0.1, f"{corr_err:.3f}"),
        Check("sampler", "1-D Normal KS test at 0.01", ks_p > 0.01, f"p={ks_p:.3f}"),
    ]


def rd_auc_reference(auc_b, auc_c, auc_best):
    """Loop-by-loop transcription of the RD-AUC estimator."""
    R = len(auc_b)
    n, d = [], []
    for b in auc_b:
        for c in auc_c:
            n.append(b - c)
            d.append(b - auc_best)
    N = len(n)
    mu_n = sum(n) / N
    mu_d = sum(d) / N
    var_n = sum((x - mu_n) ** 2 for x in n) / N
    var_d = sum((x - mu_d) ** 2 for x in d) / N
    cov = sum((x - mu_n) * (z - mu_d) for x, z in zip(n, d)) / N
    var = (var_n / mu_d**2 + mu_n**2 * var_d / mu_d**4 - 2 * mu_n * cov / mu_d**3) / R
    return mu_n / mu_d, var


def suite_rdauc(seed=0, trials=200):
    rng = np.random.default_rng(seed)
    worst = 0.0
    self_worst = 0.0
    for _ in range(trials):
        R, T = int(rng.integers(2, 12)), int(rng.integers(2, 40))
        base = evaluation.CurveSet("rmse", rng.uniform(1.0, 3.0, (R, T)), "base")
        cand = evaluation.CurveSet("rmse", rng.uniform(0.5, 3.0, (R, T)), "cand")
        bound = float(rng.uniform(0.0, 0.5))
        res = evaluation.rd_auc(base, cand, bound)
        m, v = rd_auc_reference(list(base.aucs()), list(cand.aucs()), bound * (T - 1))
        worst = max(worst, abs(res.mean - m), abs(res.variance - max(v, 0.0)))
        self_worst = max(self_worst, abs(evaluation.rd_auc(base, base, bound).mean))
    hand = evaluation.rd_auc(
        evaluation.CurveSet("rmse", np.full((3, 2), 2.0)),
        evaluation.CurveSet("rmse", np.full((3, 2), 1.0)), 0.0)
    return [
        Check("rdauc", "matches loop re-implementation", worst < 1e-12, f"{worst:.1e}"),
        Check("rdauc", "self-comparison mean is 0", self_worst == 0.0, f"{self_worst:.1e}"),
        Check("rdauc", "hand case mean 0.5 variance 0",
              hand.mean == 0.5 and hand.variance == 0.0, f"{hand.mean}, {hand.variance}"),
    ]


def suite_motorcycle(seed=0):
    sim = simulators.get_simulator("motorcycle")
    knots = np.linspace(0.0, 1.0, len(MOTO_MEAN))[:, None]
    mean_ok = np.array_equal(simulators.mean_oracle(sim, knots), np.array(MOTO_MEAN))
    std_ok = np.array_equal(simulators.noise_std_at(sim, knots), np.array(MOTO_STD))
    return [
        Check("motorcycle", "mean reproduces knot values exactly", bool(mean_ok), f"{len(MOTO_MEAN)} knots"),
        Check("motorcycle", "noise std reproduces knot values exactly", bool(std_ok), f"{len(MOTO_STD)} knots"),
    ]


SUITES = {
    "gradients": suite_gradients,
    "gp": suite_gp,
    "mixture": suite_mixture,
    "acquisition": suite_acquisition,
    "sampler": suite_sampler,
    "rdauc": suite_rdauc,
    "motorcycle": suite_motorcycle,
}


def run_suite(name, seed=0, kernel=None):
    """Run one named suite, or every suite for ``"all"``."""
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise KeyError(name)
    checks = []
    for n in names:
        fn = SUITES[n]
        if n in ("gradients", "gp"):
            checks.extend(fn(seed=seed, kernel=kernel))
        else:
            checks.extend(fn(seed=seed))
    return checks
