import math

import numpy as np
import pytest

from ifscub.errors import ValidationError
from ifscub.harness.integrands import constant_integrand, helmholtz_integrand, polynomial_integrand
from ifscub.polyspace import Polynomial

POINTS = np.random.default_rng(4).uniform(-1, 1, (100, 2))


def test_helmholtz_modulus():
    f = helmholtz_integrand()
    r = np.linalg.norm(POINTS - np.array([0.1, -2.0]), axis=1)
    values = f(POINTS)
    assert values.dtype == np.complex128
    np.testing.assert_allclose(np.abs(values), 1 / r, rtol=1e-14)
    np.testing.assert_allclose(values, np.exp(5j * r) / r, rtol=1e-14)
    assert f.name == "helmholtz"
    assert f.parameters == {"kappa": 5.0, "x0": [0.1, -2.0]}


def test_helmholtz_without_oscillation_is_real_and_positive():
    values = helmholtz_integrand(kappa=0.0, x0=(0.1, -1.25))(POINTS)
    assert np.all(values.imag == 0.0)
    assert np.all(values.real > 0.0)


def test_helmholtz_is_infinite_at_the_source():
    assert not np.isfinite(helmholtz_integrand(x0=(0.5, 0.5))(np.array([0.5, 0.5])))


@pytest.mark.parametrize("kappa, x0", [(math.nan, (0.1, -2.0)), (5.0, (math.inf, 0.0)), (5.0, [[0.1, -2.0]])])
def test_helmholtz_rejects_bad_parameters(kappa: float, x0):
    with pytest.raises(ValidationError):
        helmholtz_integrand(kappa, x0)


def test_helmholtz_checks_the_dimension():
    with pytest.raises(ValidationError):
        helmholtz_integrand()(np.zeros((3, 1)))


def test_polynomial_and_constant_integrands():
    p = Polynomial(2, {(1, 0): 2.0, (0, 2): -1.0})
    f = polynomial_integrand(p)
    np.testing.assert_allclose(f(POINTS).real, 2 * POINTS[:, 0] - POINTS[:, 1] ** 2)
    assert f.parameters == {"degree": 2, "terms": 2}
    np.testing.assert_array_equal(constant_integrand(2j)(POINTS), np.full(100, 2j))
