import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import spherical_jn

from bcslab.dispersion import g1, g1_over_z, g2
from bcslab.errors import AccuracyError, DomainError, InvalidParameterError
from bcslab.glcoeff import (ALPHA0_CONVENTION, compute_coefficients, gl_coefficients,
                            pair_wavefunction, t_profile)
from bcslab.potential import radial_rule

TC_02 = 0.07352989718429266
MU = 1.0


@pytest.fixture(scope="module")
def V(gauss5):
    return gauss5.scaled(0.2)


@pytest.fixture(scope="module")
def coeffs(V):
    return gl_coefficients(V, MU, tc=TC_02)


def test_coefficients_positive_and_certified(coeffs):
    assert all(c > 0 for c in coeffs.as_tuple())
    assert coeffs.route_discrepancy < 1e-8
    assert "L2" in ALPHA0_CONVENTION


def test_zero_mode_normalized(V):
    grid, a, lam = pair_wavefunction(V, MU, TC_02)
    assert lam == pytest.approx(-1.0, abs=1e-6)
    q = grid.nodes
    assert 4 * math.pi * np.dot(grid.weights * q * q, a * a) == pytest.approx(1.0, rel=1e-13)


def test_end_to_end_tc_matches(V, coeffs):
    c = gl_coefficients(V, MU)
    assert c.tc == pytest.approx(TC_02, rel=1e-6)
    assert np.allclose(c.as_tuple(), coeffs.as_tuple(), rtol=1e-4)


def test_scaling_covariance(V, coeffs):
    c2 = gl_coefficients(V, MU, tc=TC_02, scale=2.0)
    ratios = np.array(c2.as_tuple()) / np.array(coeffs.as_tuple())
    assert np.allclose(ratios, [4, 1, 1, 4], rtol=1e-12)


def _t_route2(V, grid, alpha, q):
    """t(q) at arbitrary momenta by transforming through position space."""
    qn = grid.nodes
    r, wr = radial_rule(V, float(qn[-1]))
    a_r = 4 * math.pi / (2 * math.pi) ** 1.5 * (
        spherical_jn(0, np.multiply.outer(r, qn)) @ (grid.weights * qn * qn * alpha))
    f = wr * r * r * V(r) * a_r
    return -2 * 4 * math.pi / (2 * math.pi) ** 1.5 * (f @ spherical_jn(0, np.multiply.outer(r, q)))


def test_coefficients_against_adaptive_quadrature(V, coeffs):
    grid, alpha, _ = pair_wavefunction(V, MU, TC_02)
    T, b = TC_02, 1.0 / TC_02

    def integ(fn):
        def f(q):
            t = float(_t_route2(V, grid, alpha, np.array([q]))[0])
            z = b * (q * q - MU)
            return q * q / (2 * math.pi ** 2) * fn(t, q, z)
        opts = dict(epsabs=1e-13, epsrel=1e-10, limit=400)
        return sum(quad(f, a, c, **opts)[0] for a, c in [(0, 0.8), (0.8, 1.0), (1.0, 1.2),
                                                         (1.2, 14.0)])

    i0 = integ(lambda t, q, z: t * t * (g1(z) + 2 / 3 * b * q * q * g2(z)))
    i1 = integ(lambda t, q, z: t * t * g1(z))
    i2 = integ(lambda t, q, z: t * t / math.cosh(min(abs(z), 600.0) / 2) ** 2)
    i3 = integ(lambda t, q, z: t ** 4 * b * g1_over_z(z))
    l0 = i0 / (16 * T * T)
    ref = (l0, i1 / (4 * T * T * l0), i2 / (8 * T * l0), i3 / (16 * T * T * l0))
    assert np.allclose(coeffs.as_tuple(), ref, rtol=1e-7)


def test_t_profile_routes(V):
    grid, alpha, _ = pair_wavefunction(V, MU, TC_02)
    t, disc = t_profile(V, alpha, TC_02, grid)
    assert disc < 1e-8
    assert np.allclose(t, _t_route2(V, grid, alpha, grid.nodes), rtol=1e-7,
                       atol=1e-9 * np.max(np.abs(t)))


def test_t_profile_detects_wrong_profile(V):
    grid, alpha, _ = pair_wavefunction(V, MU, TC_02)
    with pytest.raises(AccuracyError):
        t_profile(V, alpha * (1 + grid.nodes), TC_02, grid)


def test_kappa(coeffs):
    assert coeffs.kappa(2.0) == pytest.approx(math.sqrt(2 * coeffs.lambda2))
    with pytest.raises(DomainError):
        coeffs.kappa(0.0)


def test_invalid_inputs(V, coeffs):
    with pytest.raises(DomainError):
        gl_coefficients(V, MU, tc=TC_02, ell=1)
    with pytest.raises(InvalidParameterError):
        compute_coefficients(V, MU, -1.0, coeffs.t_profile, coeffs.grid)
    bad = coeffs.t_profile.copy()
    bad[0] = np.nan
    with pytest.raises(InvalidParameterError):
        compute_coefficients(V, MU, TC_02, bad, coeffs.grid)
