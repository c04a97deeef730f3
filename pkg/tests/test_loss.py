import numpy as np
import pytest

from nitm.loss import check_q_prime, loss_and_slope, loss_derivative, loss_slope, loss_value, zero_one_loss
from nitm.qcalc import q_exp

Z_GRID = np.round(np.arange(-500, 501) * 0.01, 2)


@pytest.mark.parametrize("q_prime, z, expected", [(0.0, 0.5, 0.5), (0.5, 1.0, 0.25), (1.0, 0.0, 1.0)])
def test_examples(q_prime, z, expected):
    assert loss_value(q_prime, z) == pytest.approx(expected, abs=1e-15)


def test_closed_forms():
    np.testing.assert_allclose(loss_value(0.0, Z_GRID), np.maximum(1 - Z_GRID, 0), rtol=0, atol=1e-12)
    np.testing.assert_allclose(loss_value(0.5, Z_GRID), np.maximum(1 - Z_GRID / 2, 0) ** 2, rtol=0, atol=1e-12)
    np.testing.assert_allclose(loss_value(1.0, Z_GRID), np.exp(-Z_GRID), rtol=1e-12, atol=0)


@pytest.mark.parametrize("bad", [-0.1, 1.5, float("nan")])
def test_q_prime_range(bad):
    with pytest.raises(ValueError):
        check_q_prime(bad)
    with pytest.raises(ValueError):
        loss_value(bad, 0.0)


class TestDerivative:
    def test_examples(self):
        assert loss_derivative(1.0, 0.0) == (-1.0, -1.0)
        assert loss_derivative(0.0, 2.0) == (0.0, 0.0)
        assert loss_derivative(0.5, 1.0) == pytest.approx((-0.5, -0.5))

    def test_hinge_kink_is_an_interval(self):
        assert loss_derivative(0.0, 1.0) == (-1.0, 0.0)
        assert loss_derivative(0.0, 0.5) == (-1.0, -1.0)

    def test_finite_differences(self, rng):
        h = 1e-6
        for q_prime in np.round(np.arange(1, 11) * 0.1, 1):
            cutoff = 1.0 / (1.0 - q_prime) if q_prime < 1 else np.inf
            for z in rng.uniform(-3.0, 3.0, size=100):
                if abs(z - cutoff) < 1e-3:
                    continue
                fd = (loss_value(q_prime, z + h) - loss_value(q_prime, z - h)) / (2 * h)
                lo, hi = loss_derivative(q_prime, z)
                assert lo == hi
                assert fd == pytest.approx(lo, abs=1e-6)

    def test_slope_matches_derivative(self, rng):
        z = rng.uniform(-3, 3, size=50)
        for q_prime in (0.0, 0.3, 1.0):
            values, slopes = loss_and_slope(q_prime, z)
            np.testing.assert_allclose(values, loss_value(q_prime, z))
            np.testing.assert_allclose(slopes, loss_slope(q_prime, z))
            for zi, si in zip(z, slopes):
                lo, hi = loss_derivative(q_prime, zi)
                assert lo - 1e-15 <= si <= hi + 1e-15


def test_zero_one():
    assert zero_one_loss(-0.1) == 1
    assert zero_one_loss(0.1) == 0
    assert zero_one_loss(0.0) == 0


def test_convexity(rng):
    for q_prime in np.linspace(0.0, 1.0, 11):
        a, b = rng.uniform(-4, 4, size=(2, 1000))
        mid = loss_value(q_prime, 0.5 * (a + b))
        assert np.all(mid <= 0.5 * (loss_value(q_prime, a) + loss_value(q_prime, b)) + 1e-12)


def test_nonincreasing(rng):
    z = np.sort(rng.uniform(-5, 5, size=500))
    for q_prime in (0.0, 0.4, 1.0):
        assert np.all(np.diff(loss_value(q_prime, z)) <= 1e-15)


def test_limit_toward_zero_one_loss():
    z_neg = np.round(np.arange(-50, 0) * 0.1, 1)
    errors = []
    for q in (-10.0, -100.0, -1000.0):
        errors.append(np.abs(q_exp(q, -z_neg) - 1.0))
    for earlier, later in zip(errors, errors[1:]):
        assert np.all(later <= earlier)
    assert errors[-1].max() < 0.01
