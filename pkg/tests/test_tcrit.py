import math

import numpy as np
import pytest
from scipy.integrate import quad

from bcslab.dispersion import ThermoPoint
from bcslab.errors import DomainError, InvalidParameterError
from bcslab.potential import RadialPotential, kernel_values
from bcslab.tcrit import (TC_PREFACTOR, UNIVERSAL_RATIO, TcOptions, b_mu, bs_lowest_eigenvalue,
                          critical_temperature, e_channel, gap_zero_range, tc_leading_order,
                          tc_low_density_formula, tc_nonlinear, tc_weak_coupling_formula,
                          tc_zero_range, w_channel, w_channel_bracket)

TC_02 = 0.07352989718429266


@pytest.fixture(scope="module")
def report(gauss5):
    return critical_temperature(gauss5.scaled(0.2), 1.0, TcOptions(ell_max=2))


def test_constants():
    assert math.log(TC_PREFACTOR) == pytest.approx(0.5772156649015329 - 2 + math.log(8 / math.pi),
                                                   abs=1e-15)
    assert UNIVERSAL_RATIO == pytest.approx(1.7638769, rel=1e-7)


def test_eigenvalue_is_minus_one_at_tc(report):
    assert report.channel == 0
    assert report.tc == pytest.approx(TC_02, rel=1e-6)
    assert report.eigenvalue_at_tc == pytest.approx(-1.0, abs=1e-5)
    lo, hi = report.bracket
    assert lo <= report.tc <= hi


def test_bracket_straddles(gauss5, report):
    V = gauss5.scaled(0.2)
    lo, hi = report.bracket
    assert bs_lowest_eigenvalue(V, 0, ThermoPoint(lo, 1.0)) < -1
    assert bs_lowest_eigenvalue(V, 0, ThermoPoint(hi, 1.0)) >= -1


def test_eigenvalue_increases_with_temperature(gauss5):
    V = gauss5.scaled(0.2)
    lams = [bs_lowest_eigenvalue(V, 0, ThermoPoint(T, 1.0)) for T in (0.01, 0.03, 0.1, 0.3, 1.0)]
    assert all(b > a for a, b in zip(lams, lams[1:]))


def test_s_wave_dominates(report):
    others = [v for k, v in report.channel_tc.items() if k > 0 and v]
    assert all(v < report.tc for v in others)
    assert not report.degenerate


def test_no_pairing_for_repulsion():
    rep = critical_temperature(RadialPotential.gaussian(-1.0, 1.0), 1.0, TcOptions(ell_max=1))
    assert rep.tc == 0.0


def test_ceiling_raises(gauss5):
    with pytest.raises(DomainError):
        critical_temperature(gauss5.scaled(3.0), 1.0, TcOptions(ell_max=0, T_ceiling=1e-2))


def test_nonlinear_criterion_matches(gauss5):
    tc, (lo, hi) = tc_nonlinear(gauss5.scaled(0.2), 1.0, rtol=1e-5)
    assert lo < hi and hi / lo - 1 <= 1e-5
    assert tc == pytest.approx(TC_02, rel=1e-4)


def test_nonlinear_bad_bracket(gauss5):
    with pytest.raises(InvalidParameterError):
        tc_nonlinear(gauss5.scaled(0.2), 1.0, bracket=(0.2, 0.3))


def test_e_channel_sign_and_decay(gauss5):
    es = [e_channel(gauss5, ell, 1.0) for ell in range(4)]
    assert all(e < 0 for e in es)
    assert all(abs(b) < abs(a) for a, b in zip(es, es[1:]))


def test_w_ladder_is_cauchy(gauss5):
    vals = [w_channel_bracket(gauss5, 0, 1.0, T) for T in (1e-4, 1e-5, 1e-6, 1e-7)]
    d = np.abs(np.diff(vals))
    assert d[1] <= d[0] / 5 and d[2] <= d[1] / 5


def _w_oracle(V, ell, mu, L=15.0):
    kf = math.sqrt(mu)
    e = e_channel(V, ell, mu)

    def f(p):
        B = float(kernel_values(V, ell, [p], [kf])[0, 0])
        return p * p * (B * B - e * e) / abs(p * p - mu) + e * e

    body = quad(f, 0, kf, epsabs=1e-12, epsrel=1e-11, limit=200)[0]
    body += quad(f, kf, L, epsabs=1e-12, epsrel=1e-11, limit=400)[0]
    return body - e * e * 0.5 * kf * math.log((L + kf) / (L - kf))


@pytest.mark.slow
@pytest.mark.parametrize("ell", [0, 1])
def test_w_against_direct_zero_temperature_integral(gauss5, ell):
    w = w_channel(gauss5, ell, 1.0)
    ref = _w_oracle(gauss5, ell, 1.0)
    assert w == pytest.approx(ref, rel=1e-6, abs=1e-9)


def test_b_mu_consistency(gauss5):
    lam = 0.2
    b, ell, det = b_mu(gauss5, 1.0, lam, ell_max=2)
    ch = det["channels"]
    for e, w, bb in ch.values():
        assert bb == pytest.approx(lam * e - lam * lam * w, rel=1e-14)
    assert b == min(v[2] for v in ch.values()) and ell == 0
    assert det["e_min_ell"] == 0
    b0, _, _ = b_mu(gauss5, 1.0, lam, ell_max=2, w_zero=True)
    assert b0 == pytest.approx(lam * e_channel(gauss5, 0, 1.0), rel=1e-14)


def test_formula_orders(gauss5):
    lam = 0.2
    e = e_channel(gauss5, 0, 1.0)
    assert tc_leading_order(e, 1.0, lam) == pytest.approx(
        TC_PREFACTOR * math.exp(1 / (lam * e)), rel=1e-14)
    t2 = tc_weak_coupling_formula(gauss5, 1.0, lam, ell_max=0)
    # second order is closer than leading order
    assert abs(math.log(t2 / TC_02)) < abs(math.log(tc_leading_order(e, 1.0, lam) / TC_02))


def test_formula_domain_errors():
    with pytest.raises(DomainError):
        tc_leading_order(0.1, 1.0, 1.0)
    with pytest.raises(DomainError):
        tc_low_density_formula(1.0, 1.0)
    with pytest.raises(DomainError):
        tc_low_density_formula(-1.0, 0.0)
    with pytest.raises(DomainError):
        tc_zero_range(0.5, 1.0)
    with pytest.raises(DomainError):
        e_channel(RadialPotential.gaussian(1, 1), 0, -1.0)
    with pytest.raises(DomainError):
        bs_lowest_eigenvalue(RadialPotential.gaussian(1, 1), 0, ThermoPoint(0.0, 1.0))


def test_zero_range_values():
    assert tc_zero_range(-1.0, 1.0) == pytest.approx(0.1280485, rel=1e-6)
    # dilute limit approaches the asymptotic formula
    devs = [abs(tc_zero_range(a, 1.0) / tc_low_density_formula(a, 1.0) - 1)
            for a in (-0.5, -0.3, -0.2)]
    assert devs[-1] < 1e-3 and devs[0] > devs[1] > devs[2]


def test_zero_range_gap_ratio():
    a = -0.25
    tc = tc_zero_range(a, 1.0)
    d0 = gap_zero_range(a, 1.0, 0.0, tc=tc)
    assert d0 / tc == pytest.approx(UNIVERSAL_RATIO, rel=1e-3)
    assert gap_zero_range(a, 1.0, 1.01 * tc, tc=tc) == 0.0
    assert 0 < gap_zero_range(a, 1.0, 0.5 * tc, tc=tc) < d0
