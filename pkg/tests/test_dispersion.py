import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from bcslab.dispersion import (EULER_GAMMA, M_MU_CONSTANT, ThermoPoint, e_delta, g1,
                               g1_over_z, g2, k_T, k_T_delta, m_mu, subtracted_integral, xi)
from bcslab.errors import DomainError, InvalidParameterError

mpmath.mp.dps = 40


def test_constants():
    assert EULER_GAMMA == pytest.approx(float(mpmath.euler), abs=1e-16)
    assert M_MU_CONSTANT == pytest.approx(-0.488072679268, abs=1e-12)


@given(st.floats(0.0, 10.0), st.floats(-2.0, 5.0), st.floats(1e-8, 5.0))
@settings(max_examples=100, deadline=None)
def test_k_T_bounds(p, mu, T):
    pt = ThermoPoint(T, mu)
    k = float(k_T(p, pt))
    x = p * p - mu
    assert k >= 2 * T * (1 - 1e-14)
    assert k >= abs(x) * (1 - 1e-14)
    assert k <= abs(x) + 2 * T * (1 + 1e-12)


def test_k_T_minimum_on_fermi_sphere():
    pt = ThermoPoint(0.1, 1.0)
    assert float(k_T(1.0, pt)) == pytest.approx(0.2, rel=1e-15)


def test_k_T_delta_reduces():
    pt = ThermoPoint(0.05, 1.0)
    p = np.linspace(0.0, 3.0, 31)
    assert np.allclose(k_T_delta(p, 0.0, pt), k_T(p, pt), rtol=1e-14)
    pt0 = ThermoPoint(0.0, 1.0)
    assert np.allclose(k_T_delta(p, 0.3, pt0), e_delta(p, 0.3, pt0), rtol=1e-15)


def test_xi_factored_form():
    assert xi(1.0 + 1e-12, 1.0) == pytest.approx(2e-12, rel=1e-3)


@pytest.mark.parametrize("T", [1e-1, 1e-2, 1e-3])
def test_m_mu_against_quad(T):
    mu = 1.0

    def f(p):
        x = p * p - mu
        if abs(x) < 1e-12:
            return p * p / (2 * T) - 1.0
        return p * p * math.tanh(x / (2 * T)) / x - 1.0

    pts = [1 - 20 * T, 1.0, 1 + 20 * T]
    body = sum(quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-13)[0]
               for a, b in zip([0.0] + pts, pts + [50.0]))
    tail = 0.5 * math.log((50.0 + 1.0) / (50.0 - 1.0))
    assert m_mu(ThermoPoint(T, mu)) == pytest.approx(body + tail, rel=1e-10, abs=1e-11)


def test_m_mu_asymptotic_constant():
    errs = [abs(m_mu(ThermoPoint(T, 1.0)) - math.log(1.0 / T) - M_MU_CONSTANT)
            for T in (1e-4, 1e-5, 1e-6)]
    assert errs[-1] < 1e-9
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("mu", [0.25, 4.0])
def test_m_mu_scaling(mu):
    # m_mu(T) = sqrt(mu) m_1(T / mu)
    T = 1e-3 * mu
    assert m_mu(ThermoPoint(T, mu)) == pytest.approx(
        math.sqrt(mu) * m_mu(ThermoPoint(1e-3, 1.0)), rel=1e-10)


def test_subtracted_integral_with_gap_against_quad():
    mu, T, d = 1.0, 0.02, 0.05

    def f(p):
        E = math.hypot(p * p - mu, d)
        return p * p * math.tanh(E / (2 * T)) / E - 1.0

    body = quad(f, 0, 60.0, points=[0.9, 1.0, 1.1], limit=500, epsabs=1e-13)[0]
    tail = 0.5 * math.log(61.0 / 59.0)
    assert subtracted_integral(mu, T, d) == pytest.approx(body + tail, rel=1e-8)


def test_m_mu_domain():
    with pytest.raises(DomainError):
        m_mu(ThermoPoint(0.0, 1.0))
    with pytest.raises(DomainError):
        subtracted_integral(-1.0, 0.1)
    with pytest.raises(InvalidParameterError):
        subtracted_integral(1.0, 0.1, delta=-1.0)


def _mp_g1(z):
    z = mpmath.mpf(z)
    return (mpmath.exp(2 * z) - 2 * z * mpmath.exp(z) - 1) / (z * z * (mpmath.exp(z) + 1) ** 2)


def _mp_g2(z):
    z = mpmath.mpf(z)
    return 2 * mpmath.exp(z) * (mpmath.exp(z) - 1) / (z * (mpmath.exp(z) + 1) ** 3)


@pytest.mark.parametrize("z", [1e-9, 1e-4, 9e-4, 1.1e-3, 0.3, 0.999, 1.0, 2.0, 15.0, 300.0])
def test_g_functions_against_mpmath(z):
    for s in (1, -1):
        zz = s * z
        assert float(g1(zz)) == pytest.approx(float(_mp_g1(zz)), rel=1e-13, abs=1e-300)
        assert float(g2(zz)) == pytest.approx(float(_mp_g2(zz)), rel=1e-13, abs=1e-300)
        assert float(g1_over_z(zz)) == pytest.approx(float(_mp_g1(zz) / zz), rel=1e-13,
                                                     abs=1e-300)


@given(st.floats(-50.0, 50.0))
@settings(max_examples=100, deadline=None)
def test_g_symmetries(z):
    assert float(g1(-z)) == pytest.approx(-float(g1(z)), abs=1e-15)
    assert float(g2(-z)) == pytest.approx(float(g2(z)), abs=1e-15)
    assert float(g1_over_z(z)) > 0


def test_g_limits_at_zero():
    assert float(g1_over_z(0.0)) == pytest.approx(1.0 / 12.0)
    assert float(g2(0.0)) == pytest.approx(0.25)
