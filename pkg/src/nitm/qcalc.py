"""Deformed exponential/logarithm and Tsallis information measures.

Conventions used throughout:

* ``0 * ln 0 = 0`` and ``0**q = 0`` for ``q > 0``; for ``q = 0`` a zero
  component contributes nothing (``p**0 = 0`` when ``p = 0``).
* Limits that leave the reals are returned as ``math.inf``; nothing is
  silently clipped.
"""

import math

import numpy as np

__all__ = [
    "q_exp",
    "q_log",
    "tsallis_entropy",
    "tsallis_divergence_generalized",
    "d_infinity_to_ones",
    "log_gamma",
]


def _scalar_or_array(out, was_scalar):
    if was_scalar:
        return float(out)
    return out


def q_exp(q, x):
    """Deformed exponential ``[1 + (1-q) x]_+ ** (1/(1-q))``.

    ``q = 1`` gives ``exp``.  ``q = -inf`` gives the pointwise limit, which
    is 1 for ``x >= 0`` and 0 for ``x < 0``.  For ``q > 1`` the exponent is
    negative and a nonpositive base (at or beyond the pole) yields ``inf``.
    Works elementwise on arrays.
    """
    was_scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("q_exp: argument must be finite")
    if q == -math.inf:
        return _scalar_or_array(np.where(x >= 0.0, 1.0, 0.0), was_scalar)
    if not math.isfinite(q):
        raise ValueError(f"q_exp: unsupported entropy index {q!r}")
    if q == 1.0:
        return _scalar_or_array(np.exp(x), was_scalar)
    one_minus_q = 1.0 - q
    base = 1.0 + one_minus_q * x
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if q < 1.0:
            out = np.where(base > 0.0, np.maximum(base, 0.0) ** (1.0 / one_minus_q), 0.0)
        else:
            out = np.where(base > 0.0, np.abs(base) ** (1.0 / one_minus_q), math.inf)
    return _scalar_or_array(out, was_scalar)


def q_log(q, x):
    """Deformed logarithm ``(x**(1-q) - 1) / (1-q)``; natural log at ``q = 1``."""
    was_scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if not (np.all(x > 0.0) and np.all(np.isfinite(x))):
        raise ValueError("q_log: argument must be positive and finite")
    if not math.isfinite(q):
        raise ValueError(f"q_log: unsupported entropy index {q!r}")
    if q == 1.0:
        out = np.log(x)
    else:
        # expm1 keeps precision when x is close to 1
        out = np.expm1((1.0 - q) * np.log(x)) / (1.0 - q)
    return _scalar_or_array(out, was_scalar)


def _check_nonnegative(name, v):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    if np.any(v < 0.0):
        raise ValueError(f"{name} has negative components")
    return v


def tsallis_entropy(q, p, atol=1e-12):
    """Tsallis entropy ``S_q(p) = -(sum p_i**q - 1)/(q - 1)`` of a pmf (k = 1).

    Sums run over the support of ``p`` so that ``q = 0`` gives
    ``||p||_0 - 1`` and ``q = 1`` gives the Shannon entropy in nats.
    """
    p = _check_nonnegative("p", p)
    if abs(p.sum() - 1.0) > atol:
        raise ValueError(f"p is not normalized (sum={p.sum()!r})")
    support = p[p > 0.0]
    if q == 1.0:
        return float(-np.sum(support * np.log(support)))
    return float(-(np.sum(support ** q) - 1.0) / (q - 1.0))


def tsallis_divergence_generalized(q, p, t):
    """Generalized Tsallis divergence between nonnegative vectors.

    ``sum_i (p_i**q t_i**(1-q) - q p_i + (q-1) t_i) / (q - 1)`` for ``q != 1``
    and the generalized KL divergence ``sum p ln(p/t) - p + t`` for ``q = 1``.
    Returns ``inf`` when some ``t_i = 0 < p_i`` and ``q >= 1``.
    """
    p = _check_nonnegative("p", p)
    t = _check_nonnegative("t", t)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    if not math.isfinite(q):
        raise ValueError("use d_infinity_to_ones for the q -> inf limit")
    pos = p > 0.0
    if q >= 1.0 and np.any(pos & (t == 0.0)):
        return math.inf
    if q < 0.0 and np.any(~pos & (t > 0.0)):
        raise ValueError("zero components of p are undefined for q < 0")
    if q == 1.0:
        pp, tt = p[pos], t[pos]
        return float(np.sum(pp * np.log(pp / tt)) - p.sum() + t.sum())
    cross = np.zeros_like(p)
    both = pos & (t > 0.0)
    # log-space product avoids overflow for large q
    cross[both] = np.exp(q * np.log(p[both]) + (1.0 - q) * np.log(t[both]))
    return float(np.sum(cross - q * p + (q - 1.0) * t) / (q - 1.0))


def d_infinity_to_ones(p):
    """``lim_{q->inf} D_q(p || 1_n)``: ``n - sum(p)`` inside the unit box, else inf."""
    p = _check_nonnegative("p", p)
    if np.any(p > 1.0):
        return math.inf
    return float(p.size - p.sum())


# ---------------------------------------------------------------------------
# log-gamma

_EULER_GAMMA = 0.5772156649015329

_ZETA_HEAD = (
    1.6449340668482264, 1.2020569031595942, 1.0823232337111381,
    1.03692775514337, 1.0173430619844492, 1.008349277381923,
    1.0040773561979444, 1.0020083928260821, 1.000994575127818,
    1.0004941886041194,
)


def _zeta_table(kmax=41):
    # zeta(k) for k = 2..kmax; the tail is summed directly once it converges fast
    vals = list(_ZETA_HEAD)
    n = np.arange(2.0, 40.0)
    for k in range(2 + len(_ZETA_HEAD), kmax + 1):
        vals.append(1.0 + float(np.sum(n ** -k)))
    return tuple(vals)


_ZETA = _zeta_table()

_STIRLING = (
    1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0,
    -691.0 / 360360.0, 1.0 / 156.0, -3617.0 / 122400.0,
)

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _lgamma_near_one(eps):
    # ln Gamma(1+eps) = -gamma*eps + sum_{k>=2} (-eps)^k zeta(k)/k, |eps| < 1
    total = 0.0
    power = -eps
    for k, z in enumerate(_ZETA, start=2):
        power *= -eps
        term = z * power / k
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-300):
            break
    return total - _EULER_GAMMA * eps


def _lgamma_stirling(x):
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    power = inv
    for c in _STIRLING:
        series += c * power
        power *= inv2
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + series


def log_gamma(x):
    """Natural log of the Gamma function for ``x > 0``.

    Relative accuracy is kept near the zeros at 1 and 2 by expanding in
    ``x - 1``; large arguments use the Stirling series and the middle range
    is shifted up by the recurrence.
    """
    x = float(x)
    if not (x > 0.0) or not math.isfinite(x):
        raise ValueError(f"log_gamma: argument must be positive and finite, got {x!r}")
    if abs(x - 1.0) < 0.25:
        return _lgamma_near_one(x - 1.0)
    if abs(x - 2.0) < 0.25:
        eps = x - 2.0
        return _lgamma_near_one(eps) + math.log1p(eps)
    if x < 1.0:
        return log_gamma(x + 1.0) - math.log(x)
    if x >= 10.0:
        return _lgamma_stirling(x)
    prod = 1.0
    while x < 10.0:
        prod *= x
        x += 1.0
    shift = math.log(prod)
    return _lgamma_stirling(x) - shift
