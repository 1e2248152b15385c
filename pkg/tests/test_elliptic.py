import math

import numpy as np
import pytest
from scipy import integrate, special

from core.elliptic import ellip_F, ellip_K, jacobi_am
from core.errors import DomainError

PARAMETERS = [0.0, 0.1, 0.5, 0.8261, 0.99, 0.999999]


def test_complete_integral_at_zero():
    assert ellip_K(0.0) == pytest.approx(math.pi / 2, abs=1e-15)


@pytest.mark.parametrize('m', PARAMETERS)
def test_complete_integral_matches_scipy(m):
    assert ellip_K(m) == pytest.approx(special.ellipk(m), rel=1e-13)


@pytest.mark.parametrize('m', PARAMETERS[:-1])
def test_incomplete_integral_matches_scipy(m):
    phi = np.linspace(-3.0, 3.0, 61)
    np.testing.assert_allclose(ellip_F(phi, m), special.ellipkinc(phi, m), rtol=1e-12, atol=1e-12)


def test_incomplete_integral_against_quadrature():
    m, phi = 0.5, 1.0
    expected, _ = integrate.quad(lambda t: 1.0 / math.sqrt(1.0 - m * math.sin(t) ** 2), 0.0, phi,
                                 epsabs=1e-14, epsrel=1e-14)
    assert ellip_F(phi, m) == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize('m', [0.2, 0.7, 0.95])
def test_quasi_periodicity(m):
    phi = np.linspace(-1.5, 1.5, 7)
    np.testing.assert_allclose(ellip_F(phi + math.pi, m), ellip_F(phi, m) + 2.0 * ellip_K(m), atol=1e-12)


@pytest.mark.parametrize('m', PARAMETERS[:-1])
def test_amplitude_matches_scipy(m):
    u = np.linspace(-10.0, 10.0, 101)
    expected = special.ellipj(u, m)[3]
    np.testing.assert_allclose(jacobi_am(u, m), expected, atol=1e-10)


@pytest.mark.parametrize('m', PARAMETERS[:-1])
def test_amplitude_inverts_integral(m):
    phi = np.linspace(-7.0, 7.0, 141)
    np.testing.assert_allclose(jacobi_am(ellip_F(phi, m), m), phi, atol=1e-10)


def test_scalar_inputs_give_floats():
    assert isinstance(ellip_F(0.3, 0.5), float)
    assert isinstance(jacobi_am(0.3, 0.5), float)


@pytest.mark.parametrize('m', [-0.1, 1.0, 1.5, float('nan')])
def test_parameter_outside_domain(m):
    with pytest.raises(DomainError):
        ellip_K(m)
    with pytest.raises(ValueError):
        jacobi_am(0.5, m)
