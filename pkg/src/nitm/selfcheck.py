"""Fast invariant suite behind ``nitm selfcheck``.

Each check returns ``(passed, detail)``.  Objectives are looked up through
their modules at call time, so a patched implementation is what gets checked.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import experiment, model, persist, qcalc, train
from .data import NormalizationParams
from .loss import loss_value

__all__ = ["CheckOutcome", "CHECKS", "central_difference_gradient", "run_selfcheck"]


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    detail: str


def central_difference_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def _relative_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def feasible_point(rng, prior, fraction=0.8):
    v = rng.normal(size=prior.d)
    v /= np.linalg.norm(v)
    if prior.gaussian:
        return v * rng.uniform(0.0, 3.0)
    return v * math.sqrt(rng.uniform(0.0, fraction) * prior.nu)


def random_spec(rng, nu, q_prime, m=8, d=3, C=1.0):
    X = rng.normal(size=(m, d))
    y = np.where(rng.random(m) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return train.make_spec(X, y, nu, q_prime, C)


def _round_trip(rng):
    worst = 0.0
    for _ in range(200):
        q = rng.uniform(-2.0, 3.0)
        x = rng.uniform(0.05, 5.0)
        worst = max(worst, abs(qcalc.q_exp(q, qcalc.q_log(q, x)) - x) / x)
    return worst <= 1e-10, f"max relative error {worst:.2e}"


def _nonextensivity(rng):
    worst = 0.0
    for _ in range(100):
        q = rng.uniform(0.1, 3.0)
        a = rng.dirichlet(np.ones(rng.integers(2, 6)))
        b = rng.dirichlet(np.ones(rng.integers(2, 6)))
        sa, sb = qcalc.tsallis_entropy(q, a), qcalc.tsallis_entropy(q, b)
        sab = qcalc.tsallis_entropy(q, np.outer(a, b).ravel())
        worst = max(worst, abs(sab - (sa + sb + (1.0 - q) * sa * sb)))
    return worst <= 1e-10, f"max deviation {worst:.2e}"


def _entropy_divergence(rng):
    worst = 0.0
    for _ in range(100):
        q = rng.uniform(0.1, 3.0)
        n = int(rng.integers(2, 10))
        p = rng.dirichlet(np.ones(n))
        u = np.full(n, 1.0 / n)
        lhs = qcalc.tsallis_entropy(q, p)
        rhs = qcalc.q_log(q, n) - n ** (1.0 - q) * qcalc.tsallis_divergence_generalized(q, p, u)
        worst = max(worst, abs(lhs - rhs))
    return worst <= 1e-10, f"max deviation {worst:.2e}"


def _loss_unification(rng):
    z = np.round(np.arange(-500, 501) * 0.01, 2)
    worst = max(
        float(np.max(np.abs(loss_value(0.0, z) - np.maximum(1.0 - z, 0.0)))),
        float(np.max(np.abs(loss_value(0.5, z) - np.maximum(1.0 - z / 2, 0.0) ** 2))),
        float(np.max(np.abs(loss_value(1.0, z) - np.exp(-z)) / np.exp(-z))),
    )
    return worst <= 1e-12, f"max deviation {worst:.2e}"


def _log_gamma(rng):
    known = {0.5: 0.5 * math.log(math.pi), 1.0: 0.0, 2.0: 0.0, 3.0: math.log(2.0),
             11.0: math.log(3628800.0), 1.5: math.log(0.5 * math.sqrt(math.pi))}
    worst = max(abs(qcalc.log_gamma(x) - v) / max(1.0, abs(v)) for x, v in known.items())
    return worst <= 1e-12, f"max error {worst:.2e}"


def _gaussian_limit(rng):
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 11))
        prior = model.PriorSpec(1e8, d)
        mu = rng.normal(size=d)
        half = 0.5 * float(mu @ mu)
        worst = max(worst, abs(model.primal_regularizer(prior, mu) - half) / max(half, 1e-300),
                    abs(model.margin_scale(prior, mu) - 1.0))
    return worst <= 1e-6, f"max relative deviation {worst:.2e}"


def _zq_closed_form(rng):
    worst = 0.0
    for _ in range(100):
        nu = float(rng.choice([1.0, 3.0, 10.0, 100.0]))
        d = int(rng.integers(1, 6))
        prior = model.PriorSpec(nu, d)
        H = rng.normal(size=(int(rng.integers(1, 8)), d))
        v = H.T @ rng.random(H.shape[0])
        # rescale beta so that the induced mean is feasible
        v *= math.sqrt(rng.uniform(0.0, 0.9) * nu) / (prior.kappa * np.linalg.norm(v))
        mu = prior.kappa * v
        r = nu / (nu + d)
        x = 0.5 * r * math.exp(2.0 * (1.0 - prior.q) * prior.log_z0) * float(v @ v)
        lhs = qcalc.q_exp(prior.q, x) ** r
        rhs = (1.0 - float(mu @ mu) / nu) ** (-0.5 * nu)
        worst = max(worst, abs(lhs - rhs) / rhs)
    return worst <= 1e-10, f"max relative deviation {worst:.2e}"


def _interior_beta(rng, spec):
    # doubling must stay feasible, so finite differences never leave the domain
    beta = rng.uniform(0.1, 0.5, size=spec.design.m)
    while True:
        try:
            model.dual_objective(spec, 2.0 * beta)
            return beta
        except model.InfeasiblePointError:
            beta *= 0.5


def _gradient(rng, which):
    worst = 0.0
    for nu in (1.0, 10.0, math.inf):
        for q_prime in (0.3, 0.5, 1.0):
            spec = random_spec(rng, nu, q_prime)
            for _ in range(5):
                if which == "primal":
                    x = feasible_point(rng, spec.prior, 0.5)
                    f = lambda v: model.primal_objective(spec, v)[0]  # noqa: E731
                    g = model.primal_objective(spec, x)[1]
                else:
                    x = _interior_beta(rng, spec)
                    f = lambda v: model.dual_objective(spec, v)[0]  # noqa: E731
                    g = model.dual_objective(spec, x)[1]
                worst = max(worst, _relative_error(g, central_difference_gradient(f, x)))
    return worst <= 1e-5, f"max relative error {worst:.2e}"


def _primal_dual(rng):
    worst = 0.0
    for nu, q_prime in ((10.0, 0.5), (math.inf, 1.0)):
        spec = random_spec(rng, nu, q_prime, m=6, d=2)
        primal = train.fit_primal(spec)
        posterior, _ = train.fit_dual(spec)
        worst = max(worst, float(np.max(np.abs(primal.point - posterior.mu))))
    return worst <= 1e-4, f"max |mu_primal - mu_dual| {worst:.2e}"


def _dobscv(rng):
    for _ in range(20):
        m = int(rng.integers(10, 80))
        X = rng.normal(size=(m, 3))
        y = np.where(rng.random(m) < 0.4, 1.0, -1.0)
        seed = int(rng.integers(1 << 30))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # tiny classes are part of the sample
            folds = experiment.dobscv_split(X, y, k=5, seed=seed)
            again = experiment.dobscv_split(X, y, k=5, seed=seed)
        for cls in (1.0, -1.0):
            counts = np.bincount(folds.fold_of[y == cls], minlength=5)
            if counts.max() - counts.min() > 1:
                return False, f"class {cls:+g} fold counts {counts.tolist()}"
        if not np.array_equal(folds.fold_of, again.fold_of):
            return False, "same seed gave different folds"
    return True, "20 random datasets balanced and reproducible"


def _model_file(rng):
    params = NormalizationParams(("a", "b"), ("numeric", "nominal"), {1: ("x", "y")},
                                 rng.normal(size=2), rng.random(2) + 0.5, ("pos", "neg"))
    original = persist.TrainedModel(rng.normal(size=3) * 1e-3, params, math.inf, 0.3, 1e4, seed=7,
                                    solver={"iterations": 12, "termination_reason": "small_gradient"})
    restored = persist.loads(persist.dumps(original))
    ok = (np.array_equal(restored.mu, original.mu) and np.array_equal(restored.params.means, params.means)
          and restored.nu == original.nu and restored.params.nominal_values == params.nominal_values
          and persist.dumps(restored) == persist.dumps(original))
    return ok, "exact round trip" if ok else "round trip changed the model"


CHECKS = (
    ("q_exp_q_log_round_trip", _round_trip),
    ("tsallis_nonextensivity", _nonextensivity),
    ("entropy_divergence_to_uniform", _entropy_divergence),
    ("loss_unification", _loss_unification),
    ("log_gamma_known_values", _log_gamma),
    ("gaussian_limit", _gaussian_limit),
    ("zq_closed_form", _zq_closed_form),
    ("primal_gradient", lambda rng: _gradient(rng, "primal")),
    ("dual_gradient", lambda rng: _gradient(rng, "dual")),
    ("primal_dual_agreement", _primal_dual),
    ("dobscv_balance", _dobscv),
    ("model_file_round_trip", _model_file),
)


def run_selfcheck(seed=0, out=None):
    """Run every check, print one line each, return the outcomes."""
    outcomes = []
    for name, check in CHECKS:
        rng = np.random.default_rng(seed)
        try:
            passed, detail = check(rng)
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        outcomes.append(CheckOutcome(name, bool(passed), detail))
        if out is not None:
            out.write(f"{'PASS' if passed else 'FAIL'}  {name:<32} {detail}\n")
    return outcomes
