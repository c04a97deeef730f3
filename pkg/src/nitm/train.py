"""Fitting the classifier in the primal (production path) or the dual (cross-check)."""

import functools
import math

import numpy as np

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
from .solver import bfgs_minimize, projected_gradient_minimize, subgradient_bfgs_minimize

__all__ = ["make_spec", "fit_primal", "fit_dual", "error_rate"]


def make_spec(features, labels, nu, q_prime, C):
    features = np.asarray(features, dtype=float)
    return ObjectiveSpec(PriorSpec(nu, features.shape[1]), q_prime, C, DesignMatrix(features, labels))


def fit_primal(spec, config=None, trace=None):
    """Minimize the primal objective from the prior mean ``mu = 0``.

    The hinge case (q' = 0) is nonsmooth and goes through
    :func:`subgradient_bfgs_minimize`; everything else through BFGS.
    """
    objective = functools.partial(primal_objective, spec)
    start = np.zeros(spec.prior.d)
    if spec.q_prime == 0.0:
        return subgradient_bfgs_minimize(objective, start, config, trace)
    return bfgs_minimize(objective, start, config, trace)


def _feasible_dual_start(spec):
    m = spec.design.m
    # the q' = 1 penalty has an unbounded slope at beta = 0
    beta = np.full(m, 1e-3 * spec.C) if spec.q_prime == 1.0 else np.zeros(m)
    for _ in range(200):
        try:
            value, _ = dual_objective(spec, beta)
        except InfeasiblePointError:
            value = math.inf
        if math.isfinite(value):
            return beta
        beta = 0.5 * beta
    raise RuntimeError("could not find a feasible dual starting point")


def fit_dual(spec, config=None, trace=None):
    """Minimize the dual over ``beta >= 0`` (``beta <= C`` for the hinge).

    Returns ``(posterior, solve_result)``; the posterior mean is the primal
    solution.
    """
    upper = spec.C if spec.q_prime == 0.0 else None
    result = projected_gradient_minimize(
        functools.partial(dual_objective, spec), _feasible_dual_start(spec), config, upper=upper, trace=trace)
    return posterior_from_beta(spec.prior, spec.design, result.point), result


def error_rate(mu, features, labels):
    """Fraction of rows whose predicted sign differs from the label."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    return float(np.mean(predict(mu, features) != labels))
