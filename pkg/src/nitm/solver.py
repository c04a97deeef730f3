"""Quasi-Newton and projected-gradient minimizers with backtracking line search.

Objectives are callables ``f(x) -> (value, gradient)``.  A trial point is
rejected (the step is shrunk) when the value is not finite, the gradient has
non-finite entries, or the objective raises
:class:`~nitm.model.InfeasiblePointError`.
"""

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .model import InfeasiblePointError

__all__ = [
    "SolverConfig",
    "SolveResult",
    "Termination",
    "bfgs_minimize",
    "subgradient_bfgs_minimize",
    "projected_gradient_minimize",
]


class Termination(str, enum.Enum):
    MAX_ITERATIONS = "max_iterations"
    ORTHOGONAL_DIRECTION = "orthogonal_direction"
    SMALL_GRADIENT = "small_gradient"
    LINE_SEARCH_FAILURE = "line_search_failure"
    STALLED = "stalled"


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 5000
    orthogonality_tolerance: float = 1e-10
    gradient_tolerance: float = 1e-8
    armijo_constant: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 60
    curvature_threshold: float = 1e-12
    stall_window: int = 50
    stall_tolerance: float = 1e-10

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("orthogonality_tolerance", "gradient_tolerance", "curvature_threshold",
                     "stall_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("armijo_constant", "backtrack_factor"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_backtracks < 1 or self.stall_window < 1:
            raise ValueError("max_backtracks and stall_window must be >= 1")


@dataclass
class SolveResult:
    point: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    termination_reason: Termination
    evaluations: int = 0


class _Counted:
    def __init__(self, objective):
        self.objective = objective
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        try:
            f, g = self.objective(x)
        except InfeasiblePointError:
            return math.inf, None
        f = float(f)
        g = np.asarray(g, dtype=float)
        if not math.isfinite(f) or not np.all(np.isfinite(g)):
            return math.inf, None
        return f, g


def _emit(trace, **record):
    if trace is None:
        return
    if callable(trace):
        trace(record)
    else:
        trace.write(json.dumps(record) + "\n")


def _start(objective, start):
    x = np.array(start, dtype=float)
    if x.ndim != 1:
        raise ValueError("start must be a 1-d vector")
    f, g = objective(x)
    if g is None:
        raise ValueError("objective is not finite at the starting point")
    return x, f, g


def _sufficient(f_new, f_ref, decrease):
    # strict decrease too: once the demanded decrease drops below the float
    # resolution of f_ref, f_new == f_ref would otherwise pass forever
    return f_new <= f_ref + decrease and f_new < f_ref


def _backtrack(objective, x, f, g, d, t, cfg):
    slope = float(g @ d)
    for _ in range(cfg.max_backtracks):
        x_new = x + t * d
        f_new, g_new = objective(x_new)
        if g_new is not None and _sufficient(f_new, f, cfg.armijo_constant * t * slope):
            return t, x_new, f_new, g_new
        t *= cfg.backtrack_factor
    return None


def _weak_wolfe(objective, x, f, g, d, t, cfg, curvature=0.5):
    # bracketing search: Armijo plus g(x+td)'d >= curvature * g'd
    slope = float(g @ d)
    lo, hi = 0.0, math.inf
    armijo_only = None
    for _ in range(cfg.max_backtracks):
        x_new = x + t * d
        f_new, g_new = objective(x_new)
        if g_new is None or not _sufficient(f_new, f, cfg.armijo_constant * t * slope):
            hi = t
        else:
            if armijo_only is None or f_new < armijo_only[2]:
                armijo_only = (t, x_new, f_new, g_new)
            if float(g_new @ d) >= curvature * slope:
                return t, x_new, f_new, g_new
            lo = t
        t = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * lo
    return armijo_only


def _quasi_newton(objective, start, cfg, trace, nonsmooth):
    cfg = cfg or SolverConfig()
    fun = _Counted(objective)
    x, f, g = _start(fun, start)
    n = x.size
    eye = np.eye(n)
    Hinv = eye.copy()
    fresh = True  # Hinv is the (unscaled) identity
    best_x, best_f, best_g = x.copy(), f, g.copy()
    history = [f]
    search = _weak_wolfe if nonsmooth else _backtrack
    reason = Termination.MAX_ITERATIONS
    it = 0
    while it < cfg.max_iterations:
        gnorm = float(np.linalg.norm(g))
        if gnorm <= cfg.gradient_tolerance:
            reason = Termination.SMALL_GRADIENT
            break
        d = -(Hinv @ g)
        if not float(g @ d) < 0.0:
            Hinv, fresh = eye.copy(), True
            d = -g
        dnorm = float(np.linalg.norm(d))
        if abs(float(d @ g)) <= cfg.orthogonality_tolerance * dnorm * gnorm:
            reason = Termination.ORTHOGONAL_DIRECTION
            break
        t0 = min(1.0, 1.0 / dnorm) if fresh else 1.0
        step = search(fun, x, f, g, d, t0, cfg)
        if step is None and not fresh:
            # stale curvature model: retry once along the steepest descent direction
            Hinv, fresh = eye.copy(), True
            d = -g
            dnorm = gnorm
            step = search(fun, x, f, g, d, min(1.0, 1.0 / dnorm), cfg)
        if step is None:
            reason = Termination.LINE_SEARCH_FAILURE
            break
        t, x_new, f_new, g_new = step
        it += 1
        _emit(trace, iteration=it, value=f_new, previous_value=f, gradient_norm=float(np.linalg.norm(g_new)),
              step=t, slope=float(g @ d))
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > cfg.curvature_threshold:
            if fresh:
                Hinv = (sy / float(y @ y)) * eye
                fresh = False
            rho = 1.0 / sy
            Hy = Hinv @ y
            Hinv = (Hinv - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                    + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s))
        x, f, g = x_new, f_new, g_new
        if f < best_f:
            best_x, best_f, best_g = x.copy(), f, g.copy()
        if nonsmooth:
            history.append(best_f)
            if len(history) > cfg.stall_window:
                old = history[-cfg.stall_window - 1]
                if old - best_f <= cfg.stall_tolerance * max(abs(old), 1.0):
                    reason = Termination.STALLED
                    break
    if not nonsmooth:
        best_x, best_f, best_g = x, f, g
    return SolveResult(point=best_x, value=best_f, gradient_norm=float(np.linalg.norm(best_g)),
                       iterations=it, termination_reason=reason, evaluations=fun.calls)


def bfgs_minimize(objective, start, config=None, trace=None):
    """BFGS with Armijo backtracking.

    The inverse-Hessian approximation starts at the identity, is rescaled by
    ``s'y / y'y`` after the first accepted step and is only updated when
    ``s'y`` exceeds ``config.curvature_threshold``, which keeps it positive
    definite.  Stops on a small gradient, on a search direction orthogonal to
    the gradient (``|d'g| <= tol |d| |g|``), on line-search failure or on the
    iteration cap.

    ``trace`` may be a callable receiving one dict per iteration or a text
    stream that receives JSON lines.
    """
    return _quasi_newton(objective, start, config, trace, nonsmooth=False)


def subgradient_bfgs_minimize(objective, start, config=None, trace=None):
    """BFGS driven by subgradients, for objectives with kinks.

    Same iteration as :func:`bfgs_minimize` except that the line search also
    brackets for a weak Wolfe point (Armijo is still enforced), which keeps
    curvature pairs informative across kinks.  The best point seen is
    returned, and the run also stops once the best value has improved by less
    than ``stall_tolerance`` (relative) over ``stall_window`` iterations.
    """
    return _quasi_newton(objective, start, config, trace, nonsmooth=True)


def projected_gradient_minimize(objective, start, config=None, upper=None, trace=None, memory=10):
    """Spectral projected gradient on ``0 <= x`` (and ``x <= upper`` if given).

    Barzilai-Borwein trial steps with backtracking along the projected
    direction.  The sufficient-decrease test compares against the largest of
    the last ``memory`` accepted values (``memory=1`` is plain monotone
    Armijo).  Stops when the projected-gradient step ``|P(x - g) - x|`` is
    below the gradient tolerance.
    """
    cfg = config or SolverConfig()
    hi = math.inf if upper is None else upper

    def project(v):
        return np.clip(v, 0.0, hi)

    fun = _Counted(objective)
    x, f, g = _start(fun, project(np.asarray(start, dtype=float)))
    alpha = 1.0 / max(float(np.linalg.norm(g)), 1.0)
    recent = [f]
    best_x, best_f, best_g = x.copy(), f, g.copy()
    reason = Termination.MAX_ITERATIONS
    it = 0
    while it < cfg.max_iterations:
        pg = project(x - g) - x
        pgnorm = float(np.linalg.norm(pg))
        if pgnorm <= cfg.gradient_tolerance:
            reason = Termination.SMALL_GRADIENT
            break
        d = project(x - alpha * g) - x
        slope = float(g @ d)
        if abs(slope) <= cfg.orthogonality_tolerance * float(np.linalg.norm(d)) * float(np.linalg.norm(g)):
            reason = Termination.ORTHOGONAL_DIRECTION
            break
        reference = max(recent)
        t = 1.0
        accepted = None
        for _ in range(cfg.max_backtracks):
            x_new = x + t * d
            f_new, g_new = fun(x_new)
            if g_new is not None and _sufficient(f_new, reference, cfg.armijo_constant * t * slope):
                accepted = (x_new, f_new, g_new)
                break
            t *= cfg.backtrack_factor
        if accepted is None:
            reason = Termination.LINE_SEARCH_FAILURE
            break
        x_new, f_new, g_new = accepted
        it += 1
        _emit(trace, iteration=it, value=f_new, previous_value=reference,
              gradient_norm=float(np.linalg.norm(g_new)), step=t, slope=slope)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 0.0:
            alpha = min(max(float(s @ s) / sy, 1e-30), 1e30)
        else:
            alpha = 1.0 / max(float(np.linalg.norm(g_new)), 1e-30)
        x, f, g = x_new, f_new, g_new
        recent.append(f)
        if len(recent) > memory:
            recent.pop(0)
        if f < best_f:
            best_x, best_f, best_g = x.copy(), f, g.copy()
    if reason is Termination.SMALL_GRADIENT:
        best_x, best_f, best_g = x, f, g
    pgnorm = float(np.linalg.norm(project(best_x - best_g) - best_x))
    return SolveResult(point=best_x, value=best_f, gradient_norm=pgnorm, iterations=it,
                       termination_reason=reason, evaluations=fun.calls)
