"""Myopic quantal response bandit policies, their estimation and calibration."""

__version__ = "0.1.0"

from .bandit import BanditInstance, ExperimentConfig, ExperimentResult, Trajectory, run_episode, run_experiment
from .bayes_opt import DPTable, solve_bayes_optimal
from .calibration import fit_alpha_curve, train_pipeline
from .estimation import estimate_alpha, log_likelihood
from .policies import PAPER_CURVE, AlphaCurveParams, MQRPolicy, alpha_star, make_policy
from .stats_dist import GAUSSIAN, GUMBEL, NoiseSpec, RngStream

__all__ = [
    "BanditInstance",
    "ExperimentConfig",
    "ExperimentResult",
    "Trajectory",
    "run_episode",
    "run_experiment",
    "DPTable",
    "solve_bayes_optimal",
    "fit_alpha_curve",
    "train_pipeline",
    "estimate_alpha",
    "log_likelihood",
    "PAPER_CURVE",
    "AlphaCurveParams",
    "MQRPolicy",
    "alpha_star",
    "make_policy",
    "GAUSSIAN",
    "GUMBEL",
    "NoiseSpec",
    "RngStream",
]
