"""Nonextensive information theoretical machine: q'-exponential margin losses with a Tsallis-divergence regularizer toward a Student-t prior."""

__version__ = "0.1.0"

from .loss import loss_value, zero_one_loss
from .model import (
    DesignMatrix,
    InfeasiblePointError,
    ObjectiveSpec,
    PriorSpec,
    dual_objective,
    posterior_from_beta,
    predict,
    primal_objective,
)
from .qcalc import q_exp, q_log, tsallis_divergence_generalized, tsallis_entropy
from .solver import SolverConfig, SolveResult, Termination, bfgs_minimize, subgradient_bfgs_minimize
from .train import error_rate, fit_dual, fit_primal, make_spec

__all__ = [
    "DesignMatrix",
    "InfeasiblePointError",
    "ObjectiveSpec",
    "PriorSpec",
    "SolveResult",
    "SolverConfig",
    "Termination",
    "bfgs_minimize",
    "dual_objective",
    "error_rate",
    "fit_dual",
    "fit_primal",
    "loss_value",
    "make_spec",
    "posterior_from_beta",
    "predict",
    "primal_objective",
    "q_exp",
    "q_log",
    "subgradient_bfgs_minimize",
    "tsallis_divergence_generalized",
    "tsallis_entropy",
    "zero_one_loss",
]
