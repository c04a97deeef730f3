import math

import mpmath
import numpy as np
import pytest

from conftest import random_feasible
from nitm.loss import loss_value
from nitm.model import (
    DesignMatrix,
    InfeasiblePointError,
    ObjectiveSpec,
    PriorSpec,
    dual_objective,
    dual_penalty,
    margin_scale,
    posterior_from_beta,
    predict,
    primal_objective,
    primal_regularizer,
    prior_density,
)
from nitm.qcalc import q_exp
from nitm.selfcheck import central_difference_gradient
from nitm.train import fit_dual, fit_primal, make_spec


def quad_z0(nu, d):
    """Normalizer of the d-dimensional Student-t kernel by radial quadrature."""
    mpmath.mp.dps = 30
    area = 2 * mpmath.pi ** (mpmath.mpf(d) / 2) / mpmath.gamma(mpmath.mpf(d) / 2)
    radial = mpmath.quad(lambda r: r ** (d - 1) * (1 + r * r / nu) ** (-(nu + d) / 2), [0, 1, 10, mpmath.inf])
    return float(area * radial)


class TestPrior:
    @pytest.mark.parametrize("nu, d", [(1.0, 1), (3.0, 2), (10.0, 3), (2.5, 5)])
    def test_normalizer_against_quadrature(self, nu, d):
        assert PriorSpec(nu, d).z0 == pytest.approx(quad_z0(nu, d), rel=1e-10)

    def test_density_examples(self):
        cauchy = PriorSpec(1.0, 1)
        assert prior_density(cauchy, np.zeros(1)) == pytest.approx(1 / math.pi, rel=1e-14)
        assert prior_density(cauchy, np.ones(1)) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
        p = PriorSpec(7.0, 4)
        assert prior_density(p, np.zeros(4)) == pytest.approx(1 / p.z0, rel=1e-14)

    def test_gaussian_branch(self):
        p = PriorSpec(math.inf, 2)
        assert p.q == 1.0
        assert prior_density(p, np.zeros(2)) == pytest.approx(1 / (2 * math.pi))

    def test_q_range(self):
        for nu in (0.5, 1.0, 10.0):
            for d in (1, 3, 8):
                q = PriorSpec(nu, d).q
                assert 1.0 < q < (2 + d) / d

    @pytest.mark.parametrize("nu, d", [(0.0, 1), (-1.0, 2), (1.0, 0), (1.0, 1.5)])
    def test_validation(self, nu, d):
        with pytest.raises(ValueError):
            PriorSpec(nu, d)


class TestPosterior:
    def test_zero_beta_is_prior(self):
        design = DesignMatrix(np.eye(2), [1, -1])
        post = posterior_from_beta(PriorSpec(3.0, 2), design, np.zeros(2))
        assert np.all(post.mu == 0) and post.c == 1.0

    def test_scalar_example(self):
        design = DesignMatrix(np.ones((1, 1)), [1])
        post = posterior_from_beta(PriorSpec(1.0, 1), design, np.array([0.7]))
        assert post.mu[0] == pytest.approx(0.7 / (2 * math.pi), rel=1e-14)

    def test_linear_in_beta(self, rng):
        design = DesignMatrix(rng.normal(size=(5, 3)), [1, -1, 1, 1, -1])
        prior = PriorSpec(50.0, 3)
        beta = rng.random(5) * 0.1
        a = posterior_from_beta(prior, design, beta).mu
        b = posterior_from_beta(prior, design, 2 * beta).mu
        np.testing.assert_array_equal(b, 2 * a)

    def test_infeasible(self):
        design = DesignMatrix(np.ones((1, 1)), [1])
        with pytest.raises(InfeasiblePointError):
            posterior_from_beta(PriorSpec(1.0, 1), design, np.array([100.0]))

    def test_negative_beta(self):
        design = DesignMatrix(np.ones((1, 1)), [1])
        with pytest.raises(ValueError):
            posterior_from_beta(PriorSpec(1.0, 1), design, np.array([-1.0]))


def test_design_matrix_rows():
    X = np.array([[1.0, 2.0], [3.0, -1.0]])
    design = DesignMatrix(X, [1, -1])
    np.testing.assert_array_equal(design.H, [[1.0, 2.0], [-3.0, 1.0]])
    with pytest.raises(ValueError):
        design.H[0, 0] = 5.0
    with pytest.raises(ValueError):
        DesignMatrix(X, [1, 0])


class TestRegularizer:
    def test_zero(self):
        assert primal_regularizer(PriorSpec(4.0, 3), np.zeros(3)) == 0.0

    def test_hand_example(self):
        mu = np.zeros(8)
        mu[0] = math.sqrt(0.5)
        expected = 0.5 * 0.5 ** (-8 / 9) * (9 - 3.5) - 4.5
        mpmath.mp.dps = 30
        exact = mpmath.mpf("0.5") * mpmath.mpf("0.5") ** (mpmath.mpf(-8) / 9) * mpmath.mpf("5.5") - mpmath.mpf("4.5")
        assert expected == pytest.approx(float(exact), rel=1e-14)
        assert primal_regularizer(PriorSpec(1.0, 8), mu) == pytest.approx(float(exact), rel=1e-12)

    def test_gaussian_limit(self, rng):
        for _ in range(100):
            d = int(rng.integers(1, 11))
            mu = rng.normal(size=d)
            mu /= np.linalg.norm(mu)
            assert primal_regularizer(PriorSpec(1e8, d), mu) == pytest.approx(0.5, rel=1e-6)

    def test_nonnegative(self, rng):
        for _ in range(300):
            nu, d = float(rng.choice([0.5, 1.0, 10.0, 1e3])), int(rng.integers(1, 10))
            mu = random_feasible(rng, nu, d, 0.999)
            assert primal_regularizer(PriorSpec(nu, d), mu) >= -1e-12

    def test_infeasible(self):
        with pytest.raises(InfeasiblePointError):
            primal_regularizer(PriorSpec(1.0, 2), np.array([1.0, 0.0]))

    def test_limit_coherence(self, rng):
        for _ in range(50):
            d = int(rng.integers(1, 8))
            mu = rng.normal(size=d)
            big, inf = PriorSpec(1e6, d), PriorSpec(math.inf, d)
            assert primal_regularizer(big, mu) == pytest.approx(primal_regularizer(inf, mu), rel=1e-4, abs=1e-4)
            assert margin_scale(big, mu) == pytest.approx(margin_scale(inf, mu), abs=1e-4)


class TestMarginScale:
    def test_examples(self):
        mu = np.array([0.5, 0.0])
        assert margin_scale(PriorSpec(1e8, 2), mu) == pytest.approx(1.0, abs=1e-6)
        assert margin_scale(PriorSpec(math.inf, 3), np.ones(3)) == 1.0

    def test_cauchy_factors(self):
        # nu^(nu/(nu+d)) pi^(-d/(nu+d)) / (nu+d) * (Gamma((nu+d)/2)/Gamma(nu/2))^(2/(nu+d))
        factors = 1.0 * math.pi ** -0.5 / 2 * (math.gamma(1.0) / math.gamma(0.5))
        assert factors == pytest.approx(1 / (2 * math.pi))
        assert margin_scale(PriorSpec(1.0, 1), np.zeros(1)) == pytest.approx(factors, rel=1e-14)

    def test_matches_product_formula(self, rng):
        for _ in range(30):
            nu, d = float(rng.uniform(0.5, 50)), int(rng.integers(1, 6))
            mu = random_feasible(rng, nu, d)
            c = 1 - float(mu @ mu) / nu
            formula = (nu ** (nu / (nu + d)) * math.pi ** (-d / (nu + d)) / (nu + d)
                       * (math.gamma((nu + d) / 2) / math.gamma(nu / 2)) ** (2 / (nu + d))
                       * c ** (-d / (nu + d)))
            assert margin_scale(PriorSpec(nu, d), mu) == pytest.approx(formula, rel=1e-10)


class TestPrimal:
    def test_value_at_zero(self, rng):
        for q_prime in (0.0, 0.5, 1.0):
            spec = make_spec(rng.normal(size=(6, 3)), [1, -1, 1, 1, -1, -1], 5.0, q_prime, 2.5)
            value, _ = primal_objective(spec, np.zeros(3))
            assert value == pytest.approx(2.5 * 6)

    def test_svm_form(self):
        X = np.array([[1.0, 0.5], [-0.5, -1.0]])
        y = np.array([1.0, -1.0])
        spec = make_spec(X, y, math.inf, 0.0, 3.0)
        mu = np.array([0.4, -0.2])
        # hinge terms by hand: 1 - 0.3 = 0.7 and 1 - (-1)(-0.2 + 0.2) = 1
        assert primal_objective(spec, mu)[0] == pytest.approx(0.5 * 0.2 + 3.0 * (0.7 + 1.0))

    def test_barrier(self, rng):
        spec = make_spec(rng.normal(size=(4, 2)), [1, -1, 1, -1], 3.0, 0.5, 1.0)
        direction = np.array([0.6, 0.8])
        values = [primal_objective(spec, math.sqrt(3.0) * t * direction)[0] for t in (0.9, 0.99, 0.999, 1 - 1e-6, 1 - 1e-12)]
        assert all(b > a for a, b in zip(values, values[1:]))
        assert values[-1] > 1e4
        value, grad = primal_objective(spec, math.sqrt(3.0) * direction)
        assert value == math.inf and np.all(np.isnan(grad))

    @pytest.mark.parametrize("nu", [1.0, 10.0, math.inf])
    @pytest.mark.parametrize("q_prime", [0.3, 0.5, 1.0])
    def test_gradient(self, rng, nu, q_prime):
        spec = make_spec(rng.normal(size=(8, 3)), np.where(rng.random(8) < 0.5, 1, -1), nu, q_prime, 1.3)
        for _ in range(50):
            mu = random_feasible(rng, nu, 3, 0.5)
            g = primal_objective(spec, mu)[1]
            fd = central_difference_gradient(lambda v: primal_objective(spec, v)[0], mu)
            assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))

    def test_hinge_subgradient(self):
        spec = make_spec(np.array([[1.0, 0.0]]), [1], math.inf, 0.0, 1.0)
        # exactly at the kink z = 1
        _, g = primal_objective(spec, np.array([1.0, 0.0]))
        lo = np.array([1.0, 0.0]) - np.array([1.0, 0.0])
        hi = np.array([1.0, 0.0])
        assert np.all(g >= lo - 1e-15) and np.all(g <= hi + 1e-15)

    def test_convexity_probe(self, rng):
        """Midpoint convexity along random feasible segments."""
        violations = []
        for nu in (10.0, 100.0, math.inf):
            for _ in range(1000):
                d, m = int(rng.integers(1, 11)), int(rng.integers(2, 10))
                spec = make_spec(rng.normal(size=(m, d)), np.where(rng.random(m) < 0.5, 1, -1), nu,
                                 float(rng.uniform()), float(10 ** rng.uniform(-2, 2)))
                a, b = random_feasible(rng, nu, d, 0.95), random_feasible(rng, nu, d, 0.95)
                fa, fb, fm = (primal_objective(spec, x)[0] for x in (a, b, 0.5 * (a + b)))
                gap = fm - 0.5 * (fa + fb)
                if gap > 1e-9 * max(1.0, abs(fa), abs(fb)):
                    violations.append((nu, d, round(gap, 4)))
        assert not violations, f"{len(violations)} midpoint-convexity violations: {violations[:5]}"


class TestDual:
    def test_penalty_examples(self):
        beta = np.full(3, 2.0)
        for q_prime in (0.0, 0.3, 0.5, 1.0):
            assert dual_penalty(q_prime, beta, 2.0) == pytest.approx(0.0, abs=1e-14)
        assert dual_penalty(0.0, np.array([2.5, 0.1]), 2.0) == math.inf
        assert dual_penalty(0.5, np.array([1.0]), 2.0) == pytest.approx(2.0 / 4)

    def test_penalty_kl_form(self, rng):
        beta, C = rng.random(4) * 3, 1.7
        expected = np.sum(beta * np.log(beta / C) - beta + C)
        assert dual_penalty(1.0, beta, C) == pytest.approx(expected, rel=1e-12)

    def test_penalty_negative_beta(self):
        with pytest.raises(ValueError):
            dual_penalty(0.5, np.array([-0.1]), 1.0)

    def test_value_at_zero(self):
        spec = make_spec(np.eye(3), [1, -1, 1], 4.0, 1.0, 2.0)
        assert dual_objective(spec, np.zeros(3))[0] == pytest.approx(3 * 2.0)

    def test_svm_dual(self):
        X = np.array([[1.0, 2.0], [-1.0, 0.5]])
        spec = make_spec(X, [1, -1], math.inf, 0.0, 1.5)
        H = spec.design.H
        for beta in (np.array([0.2, 1.0]), np.array([1.5, 0.0])):
            classical = -beta.sum() + 0.5 * float(np.sum((H.T @ beta) ** 2))
            assert dual_objective(spec, beta)[0] == pytest.approx(classical + 1.5 * 2)

    def test_zq_identity(self, rng):
        for _ in range(100):
            nu, d = float(rng.uniform(0.5, 30)), int(rng.integers(1, 6))
            prior = PriorSpec(nu, d)
            H = rng.normal(size=(4, d))
            design = DesignMatrix(H, [1, 1, 1, 1])
            beta = rng.random(4)
            v = H.T @ beta
            beta *= math.sqrt(rng.uniform(0, 0.9) * nu) / (prior.kappa * np.linalg.norm(v))
            post = posterior_from_beta(prior, design, beta)
            r = nu / (nu + d)
            arg = 0.5 * r * math.exp(2 * (1 - prior.q) * prior.log_z0) * float(np.sum((H.T @ beta) ** 2))
            assert q_exp(prior.q, arg) ** r == pytest.approx(post.c ** (-nu / 2), rel=1e-10)

    @pytest.mark.parametrize("nu", [1.0, 10.0, math.inf])
    @pytest.mark.parametrize("q_prime", [0.3, 0.5, 1.0])
    def test_gradient(self, rng, nu, q_prime):
        spec = make_spec(rng.normal(size=(6, 3)), [1, -1, 1, -1, 1, -1], nu, q_prime, 1.0)
        for _ in range(50):
            beta = rng.uniform(0.05, 0.5, size=6)
            while True:
                try:
                    dual_objective(spec, 2 * beta)
                    break
                except InfeasiblePointError:
                    beta *= 0.5
            g = dual_objective(spec, beta)[1]
            fd = central_difference_gradient(lambda b: dual_objective(spec, b)[0], beta)
            assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))

    def test_infeasible_raises(self):
        spec = make_spec(np.ones((1, 1)), [1], 1.0, 0.5, 1.0)
        with pytest.raises(InfeasiblePointError):
            dual_objective(spec, np.array([1e3]))


class TestStrongDuality:
    @pytest.mark.parametrize("nu, q_prime", [(10.0, 0.5), (math.inf, 1.0), (3.0, 1.0)])
    def test_values_and_means_agree(self, rng, nu, q_prime):
        X = rng.normal(size=(7, 2))
        y = np.array([1, -1, 1, -1, 1, 1, -1])
        spec = make_spec(X, y, nu, q_prime, 0.8)
        primal = fit_primal(spec)
        post, dual = fit_dual(spec)
        np.testing.assert_allclose(post.mu, primal.point, atol=1e-6)
        # primal optimum = C m - dual optimum
        assert primal.value == pytest.approx(0.8 * 7 - dual.value, abs=1e-6)


def test_predict():
    assert predict(np.array([1.0, 0.0]), np.array([2.0, 5.0])) == 1
    assert predict(np.array([1.0, 0.0]), np.array([-1.0, 3.0])) == -1
    assert predict(np.array([1.0, 0.0]), np.array([0.0, 3.0])) == 1
    X = np.array([[1.0, 2.0], [-3.0, 0.5]])
    mu = np.array([0.3, -0.1])
    np.testing.assert_array_equal(predict(7.5 * mu, X), predict(mu, X))


def test_objective_spec_validation():
    design = DesignMatrix(np.eye(2), [1, -1])
    with pytest.raises(ValueError):
        ObjectiveSpec(PriorSpec(1.0, 2), 1.5, 1.0, design)
    with pytest.raises(ValueError):
        ObjectiveSpec(PriorSpec(1.0, 2), 0.5, 0.0, design)
    with pytest.raises(ValueError):
        ObjectiveSpec(PriorSpec(1.0, 3), 0.5, 1.0, design)


def test_loss_enters_through_scaled_margin(rng):
    spec = make_spec(rng.normal(size=(5, 2)), [1, -1, 1, -1, 1], 4.0, 0.7, 1.1)
    mu = np.array([0.3, -0.5])
    s = margin_scale(spec.prior, mu)
    expected = primal_regularizer(spec.prior, mu) + 1.1 * np.sum(loss_value(0.7, s * (spec.design.H @ mu)))
    assert primal_objective(spec, mu)[0] == pytest.approx(expected, rel=1e-13)
