"""The q'-exponential margin-loss family.

``loss(q', z) = exp_{q'}(-z) = [1 - (1-q') z]_+ ** (1/(1-q'))`` with
q' = 0 hinge, q' = 1/2 squared hinge (scaled), q' = 1 exponential.  The 0/1
loss is the q' -> -inf limit and is only used for counting errors.
"""

import math

import numpy as np

from .qcalc import q_exp

__all__ = [
    "check_q_prime",
    "loss_value",
    "loss_derivative",
    "loss_slope",
    "loss_and_slope",
    "zero_one_loss",
]


def check_q_prime(q_prime):
    q_prime = float(q_prime)
    if not (0.0 <= q_prime <= 1.0):
        raise ValueError(f"q_prime must lie in [0, 1], got {q_prime!r}")
    return q_prime


def loss_value(q_prime, z):
    """Loss at margin(s) ``z``; elementwise on arrays."""
    q_prime = check_q_prime(q_prime)
    return q_exp(q_prime, np.negative(z, dtype=float))


def loss_derivative(q_prime, z):
    """Subdifferential of the loss at a scalar margin, as ``(lo, hi)``.

    Singleton sets come back with ``lo == hi``.  Only the hinge (q' = 0) has a
    kink, at ``z = 1`` where the interval is ``[-1, 0]``.
    """
    q_prime = check_q_prime(q_prime)
    z = float(z)
    if not math.isfinite(z):
        raise ValueError("loss_derivative: margin must be finite")
    if q_prime == 0.0:
        if z < 1.0:
            return (-1.0, -1.0)
        if z > 1.0:
            return (0.0, 0.0)
        return (-1.0, 0.0)
    g = float(loss_slope(q_prime, z))
    return (g, g)


def loss_slope(q_prime, z):
    """One element of the subdifferential, elementwise (0 is used at the hinge kink)."""
    return loss_and_slope(check_q_prime(q_prime), np.asarray(z, dtype=float))[1]


def loss_and_slope(q_prime, z):
    """Loss values and slopes for an array of margins.

    Unchecked fast path for objective evaluation; ``q_prime`` must already
    be validated.
    """
    if q_prime == 1.0:
        v = np.exp(-z)
        return v, -v
    if q_prime == 0.0:
        base = 1.0 - z
        active = base > 0.0
        return np.where(active, base, 0.0), np.where(active, -1.0, 0.0)
    base = np.maximum(1.0 - (1.0 - q_prime) * z, 0.0)
    slope_pow = q_prime / (1.0 - q_prime)
    s = base ** slope_pow
    return s * base, -s


def zero_one_loss(z):
    """Misclassification indicator ``I(z < 0)``; a zero margin counts as correct."""
    z = np.asarray(z, dtype=float)
    out = (z < 0.0).astype(float)
    return float(out) if out.ndim == 0 else out
