"""Student-t prior/posterior algebra and the primal and dual training objectives.

Notation: ``d`` weight dimension, ``nu`` degrees of freedom (``math.inf`` is
the Gaussian branch), ``H`` the m x d matrix with rows ``y_i f_i``.  The
prior-to-posterior constant ``kappa = nu/(nu+d) * Z0**(-2/(nu+d))`` appears
both in the dual-to-primal map ``mu = kappa H^T beta`` and in the margin
scale ``s(mu) = kappa * c**(-d/(nu+d))`` with ``c = 1 - |mu|^2/nu``.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .loss import check_q_prime, loss_and_slope
from .qcalc import log_gamma

__all__ = [
    "InfeasiblePointError",
    "PriorSpec",
    "PosteriorState",
    "DesignMatrix",
    "ObjectiveSpec",
    "prior_density",
    "posterior_from_beta",
    "primal_regularizer",
    "margin_scale",
    "primal_objective",
    "dual_penalty",
    "dual_penalty_gradient",
    "dual_objective",
    "predict",
]


class InfeasiblePointError(ValueError):
    """Point outside the normalizable region ``|mu|^2 < nu``."""


@dataclass(frozen=True)
class PriorSpec:
    nu: float
    d: int

    def __post_init__(self):
        nu = float(self.nu)
        if not nu > 0.0:
            raise ValueError(f"nu must be positive, got {self.nu!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "d", int(self.d))

    @property
    def gaussian(self):
        return math.isinf(self.nu)

    @property
    def q(self):
        """Entropy index of the regularizer, ``1 + 2/(nu+d)``."""
        return 1.0 if self.gaussian else 1.0 + 2.0 / (self.nu + self.d)

    @cached_property
    def log_z0(self):
        nu, d = self.nu, self.d
        if self.gaussian:
            return 0.5 * d * math.log(2.0 * math.pi)
        return (log_gamma(0.5 * nu) + 0.5 * d * math.log(nu * math.pi)
                - log_gamma(0.5 * (nu + d)))

    @property
    def z0(self):
        return math.exp(self.log_z0)

    @cached_property
    def log_kappa(self):
        if self.gaussian:
            return 0.0
        nu, d = self.nu, self.d
        return -math.log1p(d / nu) - 2.0 * self.log_z0 / (nu + d)

    @property
    def kappa(self):
        return math.exp(self.log_kappa)


@dataclass(frozen=True)
class PosteriorState:
    mu: np.ndarray
    c: float
    beta: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Rows ``y_i * f_i`` of the feature matrix; read-only after construction."""

    features: np.ndarray
    labels: np.ndarray
    H: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        phi = np.array(self.features, dtype=float, copy=True)
        y = np.array(self.labels, dtype=float, copy=True)
        if phi.ndim != 2 or y.ndim != 1 or phi.shape[0] != y.shape[0]:
            raise ValueError("features must be m x d and labels length m")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        H = y[:, None] * phi
        for arr in (phi, y, H):
            arr.flags.writeable = False
        object.__setattr__(self, "features", phi)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "H", H)

    @property
    def m(self):
        return self.H.shape[0]

    @property
    def d(self):
        return self.H.shape[1]


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    prior: PriorSpec
    q_prime: float
    C: float
    design: DesignMatrix

    def __post_init__(self):
        object.__setattr__(self, "q_prime", check_q_prime(self.q_prime))
        if not (float(self.C) > 0.0 and math.isfinite(self.C)):
            raise ValueError(f"C must be positive and finite, got {self.C!r}")
        object.__setattr__(self, "C", float(self.C))
        if self.design.d != self.prior.d:
            raise ValueError(f"prior dimension {self.prior.d} != design dimension {self.design.d}")


def _sq_norm(v):
    return float(np.dot(v, v))


def _check_feasible(prior, sq):
    if not prior.gaussian and not sq < prior.nu:
        raise InfeasiblePointError(
            f"|mu|^2 = {sq:.6g} is not below nu = {prior.nu:.6g}; posterior is not normalizable")


def prior_density(prior, w):
    """Student-t prior density; standard normal when ``nu`` is infinite."""
    w = np.asarray(w, dtype=float)
    if w.shape != (prior.d,):
        raise ValueError(f"expected a length-{prior.d} vector")
    sq = _sq_norm(w)
    if prior.gaussian:
        return math.exp(-prior.log_z0 - 0.5 * sq)
    nu, d = prior.nu, prior.d
    return math.exp(-prior.log_z0 - 0.5 * (nu + d) * math.log1p(sq / nu))


def posterior_from_beta(prior, design, beta):
    """Posterior parameters implied by dual multipliers ``beta``."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (design.m,):
        raise ValueError(f"beta must have length {design.m}")
    if np.any(beta < 0.0):
        raise ValueError("beta must be nonnegative")
    mu = prior.kappa * (design.H.T @ beta)
    sq = _sq_norm(mu)
    _check_feasible(prior, sq)
    c = 1.0 if prior.gaussian else 1.0 - sq / prior.nu
    return PosteriorState(mu=mu, c=c, beta=beta.copy())


def _regularizer_terms(nu, d, sq):
    # returns (R, dR/d|mu|^2); c**-a - 1 through expm1/log1p to survive huge nu
    a = d / (nu + d)
    log_c = math.log1p(-sq / nu)
    c_neg_a = math.exp(-a * log_c)
    value = 0.5 * (nu + d) * math.expm1(-a * log_c) + 0.5 * c_neg_a * (nu - d) * sq / nu
    slope = c_neg_a / math.exp(log_c) / (2.0 * nu) * (nu - (nu - d) * sq / (nu + d))
    return value, slope


def primal_regularizer(prior, mu):
    """Tsallis divergence from the posterior with mean ``mu`` to the prior."""
    sq = _sq_norm(np.asarray(mu, dtype=float))
    if prior.gaussian:
        return 0.5 * sq
    _check_feasible(prior, sq)
    return _regularizer_terms(prior.nu, prior.d, sq)[0]


def margin_scale(prior, mu):
    """Factor ``s(mu)`` with ``z_i = s(mu) * y_i f_i^T mu`` (q-expectation of the margin)."""
    if prior.gaussian:
        return 1.0
    sq = _sq_norm(np.asarray(mu, dtype=float))
    _check_feasible(prior, sq)
    nu, d = prior.nu, prior.d
    return math.exp(prior.log_kappa - d / (nu + d) * math.log1p(-sq / nu))


def primal_objective(spec, mu):
    """Primal objective in the posterior mean and one (sub)gradient.

    Outside the open ball ``|mu|^2 < nu`` the value is ``inf`` and the
    gradient is all-NaN, so a line search can simply reject the trial.
    """
    mu = np.asarray(mu, dtype=float)
    prior = spec.prior
    H = spec.design.H
    sq = float(mu @ mu)
    raw = H @ mu
    if prior.gaussian:
        reg, reg_slope = 0.5 * sq, 0.5
        s, s_slope = 1.0, 0.0
    else:
        nu, d = prior.nu, prior.d
        if not sq < nu:
            return math.inf, np.full_like(mu, np.nan)
        reg, reg_slope = _regularizer_terms(nu, d, sq)
        c = 1.0 - sq / nu
        if c <= 0.0:
            return math.inf, np.full_like(mu, np.nan)
        a = d / (nu + d)
        s = math.exp(prior.log_kappa - a * math.log(c))
        s_slope = s * a / (nu * c)
    values, slopes = loss_and_slope(spec.q_prime, s * raw)
    C = spec.C
    value = reg + C * float(values.sum())
    # d z_i / d mu = s h_i + raw_i * 2 mu * ds/d|mu|^2
    grad = (2.0 * reg_slope + 2.0 * C * s_slope * float(slopes @ raw)) * mu
    grad += (C * s) * (H.T @ slopes)
    return value, grad


def dual_penalty(q_prime, beta, C):
    """``C * D_{1/q'}(beta/C || 1_m)``; q' = 0 is the box indicator limit."""
    q_prime = check_q_prime(q_prime)
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0.0):
        raise ValueError("beta must be nonnegative")
    u = beta / C
    if q_prime == 0.0:
        if np.any(u > 1.0):
            return math.inf
        return C * float(u.size - u.sum())
    if q_prime == 1.0:
        pos = u > 0.0
        return C * float(np.sum(u[pos] * np.log(u[pos])) - u.sum() + u.size)
    Q = 1.0 / q_prime
    return C * float(np.sum(u ** Q - Q * u + (Q - 1.0)) / (Q - 1.0))


def dual_penalty_gradient(q_prime, beta, C):
    """Gradient of :func:`dual_penalty` in ``beta`` (interior of the box for q' = 0)."""
    q_prime = check_q_prime(q_prime)
    u = np.asarray(beta, dtype=float) / C
    if q_prime == 0.0:
        return np.full_like(u, -1.0)
    if q_prime == 1.0:
        with np.errstate(divide="ignore"):
            return np.log(u)
    Q = 1.0 / q_prime
    return Q * (u ** (Q - 1.0) - 1.0) / (Q - 1.0)


def dual_objective(spec, beta):
    """Dual objective ``ln_q Z_q(beta) + C D_{1/q'}(beta/C || 1)`` and its gradient.

    ``ln_q Z_q = (nu+d)/2 * (1 - c**(nu/(nu+d)))`` with
    ``c = 1 - kappa^2 |H^T beta|^2 / nu``; the Gaussian branch is
    ``|H^T beta|^2 / 2``.  Raises :class:`InfeasiblePointError` when
    ``c <= 0`` and returns ``inf`` outside the q' = 0 box.
    """
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0.0):
        raise ValueError("beta must be nonnegative")
    prior = spec.prior
    H = spec.design.H
    v = H.T @ beta
    sq = float(v @ v)
    penalty = dual_penalty(spec.q_prime, beta, spec.C)
    if prior.gaussian:
        value, outer = 0.5 * sq, 1.0
    else:
        nu, d = prior.nu, prior.d
        k2 = math.exp(2.0 * prior.log_kappa)
        c = 1.0 - k2 * sq / nu
        if not c > 0.0:
            raise InfeasiblePointError(f"c = {c:.6g} <= 0 at this beta")
        r = nu / (nu + d)
        log_c = math.log(c)
        value = -0.5 * (nu + d) * math.expm1(r * log_c)
        outer = k2 * math.exp((r - 1.0) * log_c)
    grad = outer * (H @ v) + dual_penalty_gradient(spec.q_prime, beta, spec.C)
    return value + penalty, grad


def predict(mu, features):
    """Sign of ``features @ mu`` with ties going to +1; accepts a row or a matrix."""
    scores = np.asarray(features, dtype=float) @ np.asarray(mu, dtype=float)
    labels = np.where(scores >= 0.0, 1, -1)
    return int(labels) if labels.ndim == 0 else labels
