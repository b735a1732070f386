import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcslab.errors import DomainError
from bcslab.potential import RadialPotential
from bcslab.scatter import radial_panels, scattering_length, scattering_length_ode


def _well(v, R):
    k = math.sqrt(v)
    return R - math.tan(k * R) / k


def test_square_well_closed_form():
    rep = scattering_length(RadialPotential.square_well(1.0, 1.0))
    assert rep.a == pytest.approx(1 - math.tan(1.0), rel=1e-12)
    assert rep.bound_state_free and rep.bs_spectrum_floor > -1


@pytest.mark.parametrize("v", [0.3, 1.0, 2.0, 2.2])
def test_square_well_depths(v):
    assert scattering_length(RadialPotential.square_well(v, 1.0)).a == pytest.approx(
        _well(v, 1.0), rel=1e-11)


@pytest.mark.parametrize("V", [RadialPotential.gaussian(1.0, 1.0),
                               RadialPotential.gaussian(0.6, 1.0),
                               RadialPotential.exponential(0.4, 1.0),
                               RadialPotential.gaussian(-1.0, 0.7)])
def test_resolvent_matches_ode(V):
    a = scattering_length(V).a
    assert a == pytest.approx(scattering_length_ode(V), rel=1e-10)
    assert scattering_length(V, method="ode_oracle").a == pytest.approx(a, rel=1e-10)


def test_born_limit():
    # a ~ (1/4 pi) int V d^3x for weak V
    V = RadialPotential.gaussian(1.0, 1.0)
    born = -(2 * math.pi) ** 1.5 / (4 * math.pi)
    for eps in (1e-3, 1e-4):
        a = scattering_length(V.scaled(eps)).a
        assert a / eps == pytest.approx(born, rel=3 * eps)


def test_bound_state_raises():
    with pytest.raises(DomainError):
        scattering_length(RadialPotential.square_well(3.0, 1.0))


def test_zero_potential():
    assert scattering_length(RadialPotential.gaussian(0.0, 1.0)).a == 0.0


def test_unknown_method():
    with pytest.raises(ValueError):
        scattering_length(RadialPotential.gaussian(1.0, 1.0), method="nope")


def test_panels_respect_breakpoints():
    edges = radial_panels(RadialPotential.square_well(1.0, 2.0), max_width=0.3)
    assert edges[0] == 0 and np.isclose(edges[-1], 2.0)
    assert np.all(np.diff(edges) <= 0.3 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 2.4))
def test_square_well_property(v):
    a = scattering_length(RadialPotential.square_well(v, 1.0)).a
    assert a == pytest.approx(_well(v, 1.0), rel=1e-9, abs=1e-12)
    assert a < 0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.5), st.floats(0.05, 0.5))
def test_deeper_wells_scatter_more(v, dv):
    V = RadialPotential.gaussian(v, 1.0)
    assert scattering_length(V.scaled(1 + dv)).a < scattering_length(V).a
