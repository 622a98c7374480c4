"""Pool-based acquisition criteria for GP active learning.

ALM scores a single GP; B-ALM, BALD, B-QBC and QB-MGP score an ensemble of
GPs built from posterior hyperparameter draws. With per-draw predictive means
``mu_j`` and observation variances ``v_j`` at a pool point::

    B-ALM  = mean_j v_j
    B-QBC  = mean_j (mu_j - mean_k mu_k)^2
    QB-MGP = B-ALM + B-QBC                      (variance of the equal-weight mixture)
    BALD   = H[moment-matched mixture] - mean_j H[N(mu_j, v_j)]
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import gp_core
from .errors import InvalidArgumentError, NumericalError

VARIANCE_FLOOR = 1e-12
MAX_DROP_FRACTION = 0.10


class Criterion(str, enum.Enum):
    ALM = "alm"
    B_ALM = "b_alm"
    BALD = "bald"
    B_QBC = "b_qbc"
    QB_MGP = "qb_mgp"
    RANDOM = "random"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise InvalidArgumentError(f"unknown acquisition criterion {name!r}") from None

    @property
    def is_bayesian(self):
        return self in (Criterion.B_ALM, Criterion.BALD, Criterion.B_QBC, Criterion.QB_MGP)


@dataclass(frozen=True)
class EnsemblePrediction:
    means: np.ndarray  # M x P
    latent_variances: np.ndarray
    observation_variances: np.ndarray
    dropped: int = 0

    @property
    def size(self):
        return self.means.shape[0]

    @classmethod
    def from_predictions(cls, preds, dropped=0):
        return cls(
            np.vstack([p.latent_mean for p in preds]),
            np.vstack([p.latent_variance for p in preds]),
            np.vstack([p.observation_variance for p in preds]),
            dropped,
        )


@dataclass(frozen=True)
class MixtureMoments:
    mixture_mean: np.ndarray
    mixture_variance: np.ndarray


@dataclass(frozen=True)
class AcquisitionScores:
    criterion: Criterion
    scores: np.ndarray


def predict_ensemble(data, samples, pool):
    """Posterior predictive of every retained draw at every pool point.

    Draws whose Cholesky fails at maximum jitter are dropped; more than 10%
    dropped is an error.
    """
    pool = np.asarray(pool, dtype=float)
    if pool.ndim == 1:
        pool = pool[:, None]
    if pool.shape[0] == 0:
        raise InvalidArgumentError("pool is empty")
    thetas = list(samples) if not isinstance(samples, gp_core.Hyperparameters) else [samples]
    preds = []
    dropped = 0
    for theta in thetas:
        try:
            preds.append(gp_core.posterior_predict(data, theta, pool))
        except NumericalError:
            dropped += 1
    if dropped > MAX_DROP_FRACTION * len(thetas) or not preds:
        raise NumericalError(f"{dropped} of {len(thetas)} posterior draws failed to factorize")
    return EnsemblePrediction.from_predictions(preds, dropped)


def _draw_mean(a):
    # averaging offsets from the first draw keeps identical draws exact
    return a[0] + (a - a[0]).mean(axis=0)


def mixture_moments(ens):
    mean = _draw_mean(ens.means)
    within = _draw_mean(ens.observation_variances)
    between = ((ens.means - mean) ** 2).mean(axis=0)
    return MixtureMoments(mean, within + between)


def score_alm(pred):
    return AcquisitionScores(Criterion.ALM, np.array(pred.observation_variance, dtype=float))


def score_b_alm(ens):
    return AcquisitionScores(Criterion.B_ALM, _draw_mean(ens.observation_variances))


def score_b_qbc(ens):
    mean = _draw_mean(ens.means)
    return AcquisitionScores(Criterion.B_QBC, ((ens.means - mean) ** 2).mean(axis=0))


def score_qb_mgp(ens):
    total = score_b_alm(ens).scores + score_b_qbc(ens).scores
    return AcquisitionScores(Criterion.QB_MGP, total)


def gaussian_entropy(variance):
    v = np.maximum(variance, VARIANCE_FLOOR)
    return 0.5 * np.log(2.0 * math.pi * math.e * v)


def score_bald(ens):
    """Mutual information between hyperparameters and the next observation.

    The mixture entropy has no closed form and is moment-matched to a
    Gaussian with the mixture variance.
    """
    mix = np.maximum(mixture_moments(ens).mixture_variance, VARIANCE_FLOOR)
    comp = np.maximum(ens.observation_variances, VARIANCE_FLOOR)
    # entropy difference written as a mean log-ratio so that the constant
    # terms cancel exactly
    return AcquisitionScores(Criterion.BALD, 0.5 * np.log(mix / comp).mean(axis=0))


def random_scores(pool_size, rng):
    return AcquisitionScores(Criterion.RANDOM, rng.random(pool_size))


_ENSEMBLE_SCORERS = {
    Criterion.B_ALM: score_b_alm,
    Criterion.BALD: score_bald,
    Criterion.B_QBC: score_b_qbc,
    Criterion.QB_MGP: score_qb_mgp,
}


def score_ensemble(criterion, ens):
    criterion = Criterion.parse(criterion)
    try:
        scorer = _ENSEMBLE_SCORERS[criterion]
    except KeyError:
        raise InvalidArgumentError(f"{criterion.value} is not an ensemble criterion") from None
    return scorer(ens)


def select_query(scores, rng):
    """Index of the maximal score; ties are broken uniformly at random."""
    s = scores.scores if isinstance(scores, AcquisitionScores) else np.asarray(scores)
    if s.size == 0:
        raise InvalidArgumentError("cannot select from an empty pool")
    if not np.all(np.isfinite(s)):
        raise InvalidArgumentError("acquisition scores must be finite")
    best = np.flatnonzero(s == s.max())
    if best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])
