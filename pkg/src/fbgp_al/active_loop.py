"""Sequential pool-based active learning with a fully Bayesian GP.

Each iteration rescales inputs to the unit cube, standardizes outputs,
samples the hyperparameter posterior, picks the KDE mode of the draws for
prediction, records NLML/RMSE, scores the pool and queries one new label.
"""

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from . import acquisition as acq
from . import simulators as sims
from .errors import InvalidArgumentError, NumericalError, SamplerFailure
from .gp_core import Dataset, Hyperparameters, PosteriorFactor, nlml_of
from .mcmc import PriorSpec, SamplerConfig, sample_posterior

log = logging.getLogger(__name__)

STD_FLOOR = 1e-12
BANDWIDTH_FLOOR = 1e-6
DEDUP_TOL = 1e-12

# spawn-key slots for the independent random streams of a run
_DESIGN, _TEST, _DESIGN_NOISE = 0, 1, 2
_SAMPLER, _POOL, _SELECT, _NOISE = 10, 11, 12, 13


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def _derived_seed(seed, *key):
    return int(np.random.SeedSequence(int(seed), spawn_key=key).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class PoolConfig:
    per_axis: int = 100
    cap: int = 10000


@dataclass(frozen=True)
class ExperimentConfig:
    """One active-learning run.

    ``design_seed`` drives the initial design, its labels and the test set;
    it defaults to ``seed``. Runs that share a design seed start from the
    same data, which pairs comparisons across criteria.
    """

    simulator: str
    criterion: str
    iterations: int
    initial_points: int = 3
    sampler: SamplerConfig = SamplerConfig()
    prior: PriorSpec = PriorSpec()
    pool: PoolConfig = PoolConfig()
    test_points: int = 1000
    lhs_candidates: int = 100
    seed: int = 0
    design_seed: Optional[int] = None

    def __post_init__(self):
        if self.iterations < 1 or self.initial_points < 1:
            raise InvalidArgumentError("iterations and initial_points must be >= 1")
        if self.test_points < 1:
            raise InvalidArgumentError("test_points must be >= 1")


@dataclass
class IterationRecord:
    iteration: int
    training_size: int
    nlml: float
    rmse: float
    theta_star: list
    queried: list
    queried_value: float
    wall_time: float = 0.0


@dataclass
class LearningCurve:
    records: list = field(default_factory=list)
    complete: bool = True
    failure: Optional[str] = None

    @property
    def nlml(self):
        return np.array([r.nlml for r in self.records])

    @property
    def rmse(self):
        return np.array([r.rmse for r in self.records])

    def payload(self):
        """Deterministic content of the curve (no timings)."""
        return {
            "complete": self.complete,
            "failure": self.failure,
            "records": [
                {k: v for k, v in dataclasses.asdict(r).items() if k != "wall_time"}
                for r in self.records
            ],
        }

    @classmethod
    def from_payload(cls, payload, wall_times=None):
        records = [IterationRecord(**r) for r in payload["records"]]
        if wall_times:
            for r, t in zip(records, wall_times):
                r.wall_time = t
        return cls(records, payload.get("complete", True), payload.get("failure"))


@dataclass(frozen=True)
class StandardizationState:
    """Affine maps: simulator box <-> unit cube, targets <-> zero mean, unit std."""

    lower: np.ndarray
    upper: np.ndarray
    y_mean: float
    y_std: float

    @classmethod
    def fit(cls, sim, targets):
        y = np.asarray(targets, dtype=float)
        std = float(np.std(y))
        return cls(sim.lower, sim.upper, float(np.mean(y)), max(std, STD_FLOOR))

    def standardize_inputs(self, X):
        return (np.asarray(X, dtype=float) - self.lower) / (self.upper - self.lower)

    def unstandardize_inputs(self, U):
        return self.lower + np.asarray(U, dtype=float) * (self.upper - self.lower)

    def standardize_targets(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def unstandardize_targets(self, z):
        return np.asarray(z, dtype=float) * self.y_std + self.y_mean


def best_mode(samples):
    """Posterior draw with the highest Gaussian-KDE density over all draws.

    Diagonal bandwidth per dimension: draw std times ``M^(-1/(D+4))`` with
    ``D`` the number of hyperparameters (Scott's rule), floored at 1e-6.
    """
    draws = samples.draws if hasattr(samples, "draws") else np.asarray(samples, dtype=float)
    M, D = draws.shape
    if M == 1:
        return Hyperparameters.from_vector(draws[0])
    std = draws.std(axis=0, ddof=1)
    h = np.maximum(std * M ** (-1.0 / (D + 4)), BANDWIDTH_FLOOR)
    Z = draws / h
    sq = np.sum(Z**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * Z @ Z.T
    np.maximum(d2, 0.0, out=d2)
    # normalizing constants are shared by every draw and do not move the argmax
    log_density = logsumexp(-0.5 * d2, axis=1)
    return Hyperparameters.from_vector(draws[int(np.argmax(log_density))])


def random_baseline_scores(pool, rng):
    return acq.random_scores(len(pool), rng)


def exclude_training_points(pool_unit, train_unit, tol=DEDUP_TOL):
    """Boolean mask of pool rows farther than ``tol`` from every training point."""
    if len(train_unit) == 0:
        return np.ones(len(pool_unit), dtype=bool)
    dist = cdist(pool_unit, train_unit)
    return dist.min(axis=1) > tol


def _sample_with_retry(data, cfg, it):
    last = None
    for attempt in range(2):
        sampler = dataclasses.replace(cfg.sampler, seed=_derived_seed(cfg.seed, _SAMPLER, it, attempt))
        try:
            return sample_posterior(data, cfg.prior, sampler)
        except (SamplerFailure, NumericalError) as exc:
            log.warning("sampler failed at iteration %d (attempt %d): %s", it, attempt, exc)
            last = exc
    raise last


def score_pool(criterion, data, samples, theta_star, pool_unit, rng):
    if criterion is acq.Criterion.RANDOM:
        return random_baseline_scores(pool_unit, rng)
    if criterion is acq.Criterion.ALM:
        return acq.score_alm(PosteriorFactor(data, theta_star).predict(pool_unit))
    ens = acq.predict_ensemble(data, samples, pool_unit)
    return acq.score_ensemble(criterion, ens)


def run_experiment(cfg):
    """Run one active-learning experiment; deterministic given the seeds."""
    sim = sims.get_simulator(cfg.simulator)
    criterion = acq.Criterion.parse(cfg.criterion)
    design_seed = cfg.seed if cfg.design_seed is None else cfg.design_seed

    U0 = sims.maximin_lhs(cfg.initial_points, sim.dim, _stream(design_seed, _DESIGN),
                          cfg.lhs_candidates)
    X = sim.from_unit(U0)
    y = np.asarray(sims.evaluate(sim, X, _stream(design_seed, _DESIGN_NOISE)), dtype=float)
    test_X = sim.from_unit(sims.latin_hypercube(cfg.test_points, sim.dim, _stream(design_seed, _TEST)))
    test_f = sims.mean_oracle(sim, test_X)

    pool_rng = _stream(cfg.seed, _POOL)
    select_rng = _stream(cfg.seed, _SELECT)
    noise_rng = _stream(cfg.seed, _NOISE)

    curve = LearningCurve()
    for it in range(cfg.iterations):
        t0 = time.perf_counter()
        state = StandardizationState.fit(sim, y)
        data = Dataset(state.standardize_inputs(X), state.standardize_targets(y))
        try:
            samples = _sample_with_retry(data, cfg, it)
        except (SamplerFailure, NumericalError) as exc:
            curve.complete = False
            curve.failure = f"iteration {it}: {exc}"
            break
        theta = best_mode(samples)
        factor = PosteriorFactor(data, theta)
        nlml = nlml_of(data, theta)
        pred = factor.predict(state.standardize_inputs(test_X))
        resid = state.unstandardize_targets(pred.latent_mean) - test_f
        rmse = math.sqrt(float(np.mean(resid**2)))

        pool = sims.grid_pool(sim, pool_rng, cfg.pool.per_axis, cfg.pool.cap)
        pool_unit = state.standardize_inputs(pool)
        keep = exclude_training_points(pool_unit, data.inputs)
        pool, pool_unit = pool[keep], pool_unit[keep]
        scores = score_pool(criterion, data, samples, theta, pool_unit, select_rng)
        idx = acq.select_query(scores, select_rng)
        x_new = pool[idx]
        y_new = sims.evaluate(sim, x_new, noise_rng)

        curve.records.append(IterationRecord(
            iteration=it,
            training_size=len(y),
            nlml=float(nlml),
            rmse=rmse,
            theta_star=[float(v) for v in theta.to_vector()],
            queried=[float(v) for v in x_new],
            queried_value=float(y_new),
            wall_time=time.perf_counter() - t0,
        ))
        X = np.vstack([X, x_new[None, :]])
        y = np.append(y, y_new)
        log.debug("%s/%s it=%d n=%d nlml=%.4f rmse=%.4g", sim.name, criterion.value,
                  it, len(y) - 1, nlml, rmse)
    curve.final_inputs = X
    curve.final_targets = y
    return curve
