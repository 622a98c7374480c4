"""Posterior sampling of GP hyperparameters.

Every log-space hyperparameter gets an independent Normal prior (default
mean 0, std 3). Chains are driven by :mod:`fbgp_al.nuts` with independent
RNG streams derived from ``(seed, chain_id)``, so results do not depend on
whether chains run serially or in a process pool.
"""

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gp_core
from .errors import InvalidArgumentError, NumericalError, SamplerFailure
from .gp_core import Hyperparameters
from .nuts import run_chain

# spawn-key slot for the chain-initialization stream (chains use 0..chains-1)
_INIT_STREAM = 1 << 20


@dataclass(frozen=True)
class PriorSpec:
    mean: float = 0.0
    std: float = 3.0

    def __post_init__(self):
        if not self.std > 0:
            raise InvalidArgumentError("prior std must be positive")

    def logpdf(self, v):
        v = np.asarray(v, dtype=float)
        z = (v - self.mean) / self.std
        return float(np.sum(-0.5 * z * z - math.log(self.std) - 0.5 * math.log(2 * math.pi)))

    def grad_logpdf(self, v):
        return -(np.asarray(v, dtype=float) - self.mean) / self.std**2


@dataclass(frozen=True)
class SamplerConfig:
    """NUTS settings. ``samples_per_chain`` counts warm-up iterations too."""

    chains: int = 5
    samples_per_chain: int = 500
    warmup: int = 200
    target_accept: float = 0.8
    max_tree_depth: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.chains < 1 or self.samples_per_chain < 1 or self.max_tree_depth < 1:
            raise InvalidArgumentError("chains, samples_per_chain, max_tree_depth must be >= 1")
        if not 0 <= self.warmup < self.samples_per_chain:
            raise InvalidArgumentError("need 0 <= warmup < samples_per_chain")
        if not 0.0 < self.target_accept < 1.0:
            raise InvalidArgumentError("target_accept must lie in (0, 1)")

    @property
    def draws_per_chain(self):
        return self.samples_per_chain - self.warmup

    @property
    def total_draws(self):
        return self.chains * self.draws_per_chain


@dataclass(frozen=True)
class ChainDiagnostics:
    chain: int
    accept_rate: float
    divergences: int
    step_size: float
    mean_tree_depth: float
    warmup_divergences: int = 0


@dataclass(frozen=True)
class PosteriorSamples:
    draws: np.ndarray  # M x (d+1), log space
    chain_ids: np.ndarray
    accept_stats: np.ndarray
    diagnostics: list = field(default_factory=list)

    @property
    def size(self):
        return self.draws.shape[0]

    def hyperparameters(self, j):
        return Hyperparameters.from_vector(self.draws[j])

    def __iter__(self):
        for j in range(self.size):
            yield self.hyperparameters(j)


def log_posterior(data, theta, prior=PriorSpec()):
    """Log marginal likelihood plus the log prior density of the log-hyperparameters."""
    return gp_core.log_marginal_likelihood(data, theta) + prior.logpdf(theta.to_vector())


def log_posterior_gradient(data, theta, prior=PriorSpec()):
    return gp_core.lml_gradient(data, theta) + prior.grad_logpdf(theta.to_vector())


class GPLogPosterior:
    """Picklable ``q -> (log posterior, gradient)`` for a fixed dataset."""

    def __init__(self, data, prior):
        self.data = data
        self.prior = prior

    def __call__(self, q):
        lml, g = gp_core._backend.lml_and_grad(
            self.data.inputs, self.data.targets, q[:-1], q[-1], True
        )
        return lml + self.prior.logpdf(q), g + self.prior.grad_logpdf(q)


def chain_rng(seed, chain_id):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(chain_id),)))


def initialize_chains(config, prior, rng, dim):
    """One prior draw of ``dim`` input length scales plus noise per chain."""
    v = prior.mean + prior.std * rng.standard_normal((config.chains, dim + 1))
    return [Hyperparameters.from_vector(row) for row in v]


def _finite_start(target, prior, rng, dim, first):
    q = first.to_vector()
    for _ in range(100):
        try:
            lp, g = target(q)
            if np.isfinite(lp) and np.all(np.isfinite(g)):
                return q
        except NumericalError:
            pass
        q = prior.mean + prior.std * rng.standard_normal(dim + 1)
    raise NumericalError("could not find a finite starting point for the chain")


def _run_one(args):
    target, init, chain_id, config = args
    rng = chain_rng(config.seed, chain_id)
    return run_chain(
        target, init, config.warmup, config.draws_per_chain, rng,
        target_accept=config.target_accept, max_tree_depth=config.max_tree_depth,
    )


def sample_target(target, inits, config, workers=1):
    """Run ``config.chains`` NUTS chains on an arbitrary ``q -> (logp, grad)``.

    ``inits`` holds one starting vector per chain.
    """
    jobs = [(target, np.asarray(inits[c], dtype=float), c, config)
            for c in range(config.chains)]
    if workers > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=min(workers, config.chains)) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]

    diagnostics = [
        ChainDiagnostics(
            chain=c,
            accept_rate=float(np.mean(r.accept_stats)),
            divergences=int(np.sum(r.divergent)),
            step_size=float(r.step_size),
            mean_tree_depth=float(np.mean(r.tree_depths)),
            warmup_divergences=int(r.warmup_divergences),
        )
        for c, r in enumerate(results)
    ]
    n = config.draws_per_chain
    if all(d.divergences > 0.5 * n for d in diagnostics):
        raise SamplerFailure("all chains diverged on more than half of their transitions",
                             diagnostics=diagnostics)
    draws = np.concatenate([r.draws for r in results], axis=0)
    if not np.all(np.isfinite(draws)):
        raise SamplerFailure("non-finite draws", diagnostics=diagnostics)
    return PosteriorSamples(
        draws=draws,
        chain_ids=np.repeat(np.arange(config.chains), n),
        accept_stats=np.concatenate([r.accept_stats for r in results]),
        diagnostics=diagnostics,
    )


def sample_posterior(data, prior=PriorSpec(), config=SamplerConfig(), workers=1):
    """Draw ``chains * (samples_per_chain - warmup)`` hyperparameter samples."""
    target = GPLogPosterior(data, prior)
    init_rng = np.random.default_rng(
        np.random.SeedSequence(int(config.seed), spawn_key=(_INIT_STREAM,))
    )
    starts = initialize_chains(config, prior, init_rng, data.dim)
    inits = [_finite_start(target, prior, init_rng, data.dim, s) for s in starts]
    return sample_target(target, inits, config, workers=workers)


def write_draws_jsonl(samples, path):
    """One JSON line per draw: chain, index within chain, theta, accept stat."""
    counters = {}
    with open(path, "w") as fh:
        for row, chain, acc in zip(samples.draws, samples.chain_ids, samples.accept_stats):
            idx = counters.get(int(chain), 0)
            counters[int(chain)] = idx + 1
            fh.write(json.dumps({
                "chain": int(chain),
                "index": idx,
                "log_length_scales": [float(v) for v in row[:-1]],
                "log_noise_std": float(row[-1]),
                "accept_stat": float(acc),
            }) + "\n")
