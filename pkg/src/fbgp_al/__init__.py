"""Active learning for regression with fully Bayesian Gaussian processes.

The GP log marginal likelihood and its gradient run in a compiled extension
when it is available and in numpy otherwise; ``fbgp_al.BACKEND`` reports
which one was loaded.
"""

from ._backend import BACKEND
from .acquisition import Criterion
from .active_loop import ExperimentConfig, LearningCurve, best_mode, run_experiment
from .evaluation import CurveSet, auc, rd_auc, summarize
from .gp_core import Dataset, Hyperparameters, posterior_predict
from .mcmc import PriorSpec, SamplerConfig, sample_posterior
from .simulators import get_simulator

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Criterion", "CurveSet", "Dataset", "ExperimentConfig",
    "Hyperparameters", "LearningCurve", "PriorSpec", "SamplerConfig",
    "auc", "best_mode", "get_simulator", "posterior_predict", "rd_auc",
    "run_experiment", "sample_posterior", "summarize",
]
