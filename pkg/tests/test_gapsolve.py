import math

import numpy as np
import pytest

from bcslab.dispersion import ThermoPoint
from bcslab.errors import InvalidParameterError
from bcslab.gapsolve import (GapOptions, check_translation_invariance_condition, energy_gap,
                             free_energy, gap_map, interpolate_delta, solve_gap, solve_gap_T0,
                             verify_gap_residual)
from bcslab.potential import channel_kernel_position
from bcslab.verification import constraint_defects

TC_02 = 0.07352989718429266   # T_c of the lambda = 0.2 reference gaussian


@pytest.fixture(scope="module")
def sol_low(gauss5):
    return solve_gap(gauss5.scaled(0.3), 0, ThermoPoint(0.01, 1.0))


@pytest.fixture(scope="module")
def sol_T0(gauss5):
    return solve_gap_T0(gauss5.scaled(0.2), 0, 1.0)


def test_nontrivial_solution_is_a_fixed_point(sol_low):
    assert not sol_low.trivial and sol_low.converged
    assert verify_gap_residual(sol_low) <= 1e-8
    g = sol_low.grid
    kmat = channel_kernel_position(sol_low.potential, 0, g).matrix
    F = gap_map(kmat, g.weights * g.nodes ** 2, sol_low.delta, sol_low.xi, sol_low.pt.T)
    assert np.max(np.abs(F - sol_low.delta)) <= 1e-9 * np.max(np.abs(sol_low.delta))


def test_constraint_identities(sol_low, sol_T0):
    for s in (sol_low, sol_T0):
        rng, ident, rhs_min = constraint_defects(s)
        assert rng <= 1e-12 and ident <= 1e-12 and rhs_min >= -1e-12


def test_pair_state_formulas(sol_low):
    K = sol_low.k_delta
    assert np.allclose(sol_low.alpha_hat, sol_low.delta / (2 * K), rtol=1e-14, atol=0)
    assert np.allclose(sol_low.gamma_hat, 0.5 - sol_low.xi / (2 * K), rtol=1e-12, atol=1e-15)


def test_superconducting_phase_lowers_free_energy(sol_low):
    F, Fn = free_energy(sol_low)
    assert F < Fn


def test_free_energy_of_trivial_solution_is_normal(gauss5):
    s = solve_gap(gauss5.scaled(0.2), 0, ThermoPoint(0.2, 1.0))
    assert s.trivial
    F, Fn = free_energy(s)
    assert F == pytest.approx(Fn, rel=1e-13)


@pytest.mark.parametrize("factor,trivial", [(0.99, False), (0.999, False), (1.001, True),
                                            (1.01, True)])
def test_trivial_call_near_tc(gauss5, factor, trivial):
    s = solve_gap(gauss5.scaled(0.2), 0, ThermoPoint(factor * TC_02, 1.0))
    assert s.trivial is trivial
    if not trivial:
        assert verify_gap_residual(s) <= 1e-8


def test_gap_decreases_with_temperature(gauss5):
    V = gauss5.scaled(0.2)
    vals = []
    for T in (0.01, 0.03, 0.05, 0.07):
        s = solve_gap(V, 0, ThermoPoint(T, 1.0))
        vals.append(float(interpolate_delta(s, V, [1.0])[0]))
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0


def test_zero_temperature_solution(sol_T0):
    assert not sol_T0.trivial
    assert verify_gap_residual(sol_T0) <= 1e-8
    gap = energy_gap(sol_T0)
    d_f = abs(float(interpolate_delta(sol_T0, sol_T0.potential, [1.0])[0]))
    # the minimum of E sits on the Fermi sphere up to O(Delta^2)
    assert gap == pytest.approx(d_f, rel=1e-2)
    assert gap <= d_f * (1 + 1e-12)


def test_energy_gap_of_normal_state(gauss5):
    s = solve_gap(gauss5.scaled(0.2), 0, ThermoPoint(0.5, 1.0))
    assert energy_gap(s) == 0.0


def test_nystrom_interpolation_reproduces_nodes(sol_low):
    d = interpolate_delta(sol_low, sol_low.potential, sol_low.grid.nodes[::17])
    assert np.allclose(d, sol_low.delta[::17], rtol=1e-9, atol=1e-12)


def test_translation_invariance_condition(sol_low):
    lam, vec, overlap = check_translation_invariance_condition(sol_low, return_vector=True)
    assert abs(lam) <= 1e-6 and overlap >= 0.999


def test_sign_convention(sol_low):
    i = int(np.argmin(np.abs(sol_low.grid.nodes - 1.0)))
    assert sol_low.delta[i] > 0


def test_grid_refinement_stable(gauss5):
    from bcslab.specfun import GridOptions
    V = gauss5.scaled(0.3)
    pt = ThermoPoint(0.02, 1.0)
    a = solve_gap(V, 0, pt)
    b = solve_gap(V, 0, pt, GapOptions(grid=GridOptions(points_per_panel=16, cutoff=30.0)))
    da = float(interpolate_delta(a, V, [1.0])[0])
    db = float(interpolate_delta(b, V, [1.0])[0])
    assert da == pytest.approx(db, rel=1e-7)


def test_options_validation():
    with pytest.raises(InvalidParameterError):
        GapOptions(damping=0.0)
    with pytest.raises(InvalidParameterError):
        GapOptions(tol=-1.0)


def test_repulsive_potential_has_no_gap():
    from bcslab.potential import RadialPotential
    V = RadialPotential.gaussian(-1.0, 1.0)
    assert solve_gap(V, 0, ThermoPoint(0.01, 1.0)).trivial
