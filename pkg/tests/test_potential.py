import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from bcslab.errors import ConfigError, InvalidParameterError
from bcslab.potential import (RadialPotential, channel_kernel_momentum,
                              channel_kernel_position, fourier_transform, kernel_values)
from bcslab.specfun import GridOptions, legendre_p
from bcslab.tcrit import e_channel


def _families():
    r = np.linspace(0.0, 6.0, 121)[1:]
    return [RadialPotential.gaussian(1.5, 0.8), RadialPotential.square_well(1.0, 1.2),
            RadialPotential.exponential(0.7, 0.5),
            RadialPotential.tabulated(r, -np.exp(-r ** 2) * (1 + 0.3 * r))]


@pytest.fixture(scope="module")
def grid64():
    g = GridOptions(cutoff=5.0, points_per_panel=8, panels_per_decade=2).build(1.0, 0.3)
    assert 60 <= g.size <= 100
    return g


@pytest.mark.parametrize("V", _families()[:3], ids=lambda V: V.family)
@pytest.mark.parametrize("ell", [0, 1, 2])
def test_kernel_routes_agree(V, ell, grid64):
    a = channel_kernel_position(V, ell, grid64).matrix
    b = channel_kernel_momentum(V, ell, grid64).matrix
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))


@pytest.mark.slow
@pytest.mark.parametrize("ell", [0, 2])
def test_kernel_routes_agree_tabulated(ell, grid64):
    V = _families()[3]
    a = channel_kernel_position(V, ell, grid64).matrix
    b = channel_kernel_momentum(V, ell, grid64).matrix
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))


@pytest.mark.parametrize("ell,p,q", [(0, 0.5, 1.0), (1, 1.0, 1.0), (2, 2.3, 0.7), (4, 3.0, 3.1)])
def test_kernel_against_mpmath(ell, p, q):
    V = RadialPotential.gaussian(2.0, 0.9)
    mp_j = lambda l, x: mpmath.sqrt(mpmath.pi / (2 * x)) * mpmath.besselj(l + 0.5, x)
    f = lambda r: r * r * (-2.0) * mpmath.exp(-r * r / (2 * 0.81)) * mp_j(ell, p * r) * mp_j(ell, q * r)
    ref = float(2 / mpmath.pi * mpmath.quad(f, [0, 2, 5, 12]))
    assert kernel_values(V, ell, [p], [q])[0, 0] == pytest.approx(ref, rel=1e-11, abs=1e-15)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("V", _families(), ids=lambda V: V.family)
def test_fourier_transform_against_quad(V):
    for p in (0.0, 0.7, 2.5, 6.0):
        def f(r):
            j0 = math.sin(p * r) / (p * r) if p * r > 1e-8 else 1.0
            return r * r * float(V(r)) * j0
        pts = [V.range] if V.family == "square_well" else None
        val, _ = quad(f, 0, V.support(), points=pts, limit=400, epsabs=1e-13, epsrel=1e-11)
        ref = 4 * math.pi * val / (2 * math.pi) ** 1.5
        assert float(fourier_transform(V, p)) == pytest.approx(ref, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("ell", [0, 1, 2, 3])
def test_fermi_sphere_eigenvalue_by_angular_quadrature(ell, gauss5):
    # e_ell = (2 pi)^{-1/2} int_{-1}^{1} Vhat(sqrt(2 mu (1 - u))) P_ell(u) du
    mu = 1.0
    f = lambda u: float(fourier_transform(gauss5, math.sqrt(max(2 * mu * (1 - u), 0.0)))) \
        * legendre_p(ell, u)
    ref = quad(f, -1, 1, epsabs=1e-13, epsrel=1e-12)[0] / math.sqrt(2 * math.pi)
    assert e_channel(gauss5, ell, mu) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("V", _families(), ids=lambda V: V.family)
def test_partial_wave_sum_rule(V):
    kf = 1.0
    total = sum((2 * l + 1) * kernel_values(V, l, [kf], [kf])[0, 0] for l in range(41))
    assert total == pytest.approx(V.volume_integral() / (2 * math.pi ** 2), rel=1e-6)


def test_kernel_symmetric_and_cached(grid64, gauss5):
    k1 = channel_kernel_position(gauss5, 0, grid64)
    assert np.array_equal(k1.matrix, k1.matrix.T)
    assert channel_kernel_position(gauss5, 0, grid64) is k1
    with pytest.raises(ValueError):
        k1.matrix[0, 0] = 1.0


def test_kernel_accuracy_check_runs(grid64, gauss5):
    channel_kernel_position(gauss5.scaled(0.5), 1, grid64, check=True)


@given(st.floats(0.1, 10.0), st.floats(0.2, 3.0), st.floats(0.1, 4.0))
@settings(max_examples=25, deadline=None)
def test_kernel_linear_in_coupling(v, s, c):
    V = RadialPotential.gaussian(v, s)
    p = np.array([0.3, 1.0, 2.0])
    a = kernel_values(V.scaled(c), 0, p, p)
    b = c * kernel_values(V, 0, p, p)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))


def test_from_spec_roundtrip():
    V = RadialPotential.from_spec("gaussian:v=5,s=1.5,lambda=0.2")
    assert (V.family, V.strength, V.range, V.coupling) == ("gaussian", 5.0, 1.5, 0.2)
    W = RadialPotential.from_spec(V.spec_string())
    assert W == V
    assert RadialPotential.from_spec("square_well:v=2,R=1").range == 1.0


def test_from_spec_errors(tmp_path):
    with pytest.raises(ConfigError):
        RadialPotential.from_spec("gaussian:v=5,q=1")
    with pytest.raises(ConfigError):
        RadialPotential.from_spec("lorentzian:v=1")
    with pytest.raises(ConfigError):
        RadialPotential.from_spec("tabulated:v=1")


def test_tabulated_from_file(tmp_path):
    r = np.linspace(0.05, 6.0, 120)
    path = tmp_path / "V.txt"
    np.savetxt(path, np.column_stack([r, -np.exp(-r ** 2)]))
    V = RadialPotential.from_spec(f"tabulated:file={path}")
    assert float(V(1.0)) == pytest.approx(-math.exp(-1.0), rel=1e-4)
    assert float(V(10.0)) == 0.0


def test_invalid_potentials():
    with pytest.raises(InvalidParameterError):
        RadialPotential.gaussian(1.0, -1.0)
    with pytest.raises(InvalidParameterError):
        RadialPotential.gaussian(float("nan"), 1.0)
    with pytest.raises(InvalidParameterError):
        RadialPotential.tabulated([1, 2, 3, 4], [-1, -1, -1, -1])


def test_volume_integral_closed_forms():
    assert RadialPotential.square_well(2.0, 1.0).volume_integral() == \
        pytest.approx(-2.0 * 4 * math.pi / 3)
    assert RadialPotential.gaussian(1.0, 1.0).volume_integral() == \
        pytest.approx(-(2 * math.pi) ** 1.5)
