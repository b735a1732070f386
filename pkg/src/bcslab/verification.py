"""Named end-to-end verification suites, one per acceptance criterion.

Each suite returns a :class:`SuiteResult`; ``run_suites`` runs a selection
and the command line exposes them under ``bcslab verify``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dispersion import M_MU_CONSTANT, ThermoPoint, m_mu
from .gapsolve import (GapOptions, check_translation_invariance_condition, energy_gap,
                       solve_gap, solve_gap_T0, verify_gap_residual)
from .glcoeff import gl_coefficients
from .glfield import (ExternalFields, GLMinOptions, PeriodicField, critical_D,
                      gl_energy, gl_energy_and_gradient, minimize_gl)
from .potential import (RadialPotential, channel_kernel_momentum, channel_kernel_position,
                        kernel_values)
from .scatter import scattering_length, scattering_length_ode
from .specfun import GridOptions
from .tcrit import (TcOptions, UNIVERSAL_RATIO, b_mu, bs_lowest_eigenvalue,
                    critical_temperature, e_channel, gap_zero_range, tc_low_density_formula,
                    tc_nonlinear, tc_weak_coupling_formula, tc_zero_range)

__all__ = ["SuiteResult", "SUITES", "run_suite", "run_suites", "reference_potential"]


@dataclass
class SuiteResult:
    name: str
    criterion: int
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0


def reference_potential():
    """Attractive gaussian with ``Vhat <= 0`` used by the coupling ladders."""
    return RadialPotential.gaussian(5.0, 1.0)


def _strictly_decreasing(xs):
    return all(b < a for a, b in zip(xs[:-1], xs[1:]))


def _fmt(xs):
    return "[" + ", ".join(f"{x:.4g}" for x in xs) + "]"


# -- 1 ----------------------------------------------------------------------

def suite_universal_ratio(ladder=(0.3, 0.2, 0.15, 0.1), mu=1.0):
    V = reference_potential()
    ratios, devs = [], []
    for lam in ladder:
        W = V.scaled(lam)
        tc = critical_temperature(W, mu, TcOptions(ell_max=0)).tc
        gap = energy_gap(solve_gap_T0(W, 0, mu), W)
        ratios.append(gap / tc)
        devs.append(abs(gap / tc - UNIVERSAL_RATIO) / UNIVERSAL_RATIO)
    ok = _strictly_decreasing(devs) and devs[-1] <= 0.05
    return ok, f"ratio {_fmt(ratios)} rel.dev {_fmt(devs)} (target {UNIVERSAL_RATIO:.6f})", \
        {"lambda": list(ladder), "ratio": ratios, "deviation": devs}


# -- 2 ----------------------------------------------------------------------

def suite_m_mu(mu=1.0, temps=(1e-4, 1e-5, 1e-6)):
    errs = []
    for T in temps:
        val = m_mu(ThermoPoint(T, mu)) - math.sqrt(mu) * math.log(mu / T)
        errs.append(abs(val - M_MU_CONSTANT))
    ok = errs[-1] <= 1e-3 and all(b <= a for a, b in zip(errs[:-1], errs[1:]))
    return ok, f"|m_mu - sqrt(mu) ln(mu/T) - C| = {_fmt(errs)}", {"T": list(temps), "error": errs}


# -- 3, 4 -------------------------------------------------------------------

_TC_CACHE = {}


def _ladder_tc(lam, mu, ell_max):
    key = (lam, mu, ell_max)
    if key not in _TC_CACHE:
        _TC_CACHE[key] = critical_temperature(reference_potential().scaled(lam), mu,
                                              TcOptions(ell_max=ell_max))
    return _TC_CACHE[key]


def suite_weak_coupling(ladder=(0.3, 0.2, 0.1), mu=1.0):
    V = reference_potential()
    e = e_channel(V, 0, mu)
    target = -1.0 / (math.sqrt(mu) * e)
    devs = []
    for lam in ladder:
        tc = _ladder_tc(lam, mu, 2).tc
        devs.append(abs(lam * math.log(mu / tc) - target) / abs(target))
    ok = _strictly_decreasing(devs) and devs[-1] <= 0.10
    return ok, f"rel.dev {_fmt(devs)}", {"lambda": list(ladder), "deviation": devs, "e_mu": e}


def suite_refined_constant(ladder=(0.3, 0.2, 0.1), mu=1.0, ell_max=2):
    V = reference_potential()
    diffs = []
    for lam in ladder:
        tc = _ladder_tc(lam, mu, ell_max).tc
        b, _, _ = b_mu(V, mu, lam, ell_max=ell_max)
        diffs.append(abs(math.log(tc) - math.log(tc_weak_coupling_formula(V, mu, lam, b=b))))
    ok = _strictly_decreasing(diffs)
    return ok, f"|ln Tc - ln Tc_formula| = {_fmt(diffs)}", {"lambda": list(ladder), "diff": diffs}


# -- 5, 6, 7 ----------------------------------------------------------------

def _gap_samples():
    """Converged solver outputs reused by the residual and identity suites."""
    V = reference_potential()
    sols = []
    for lam, T in ((0.3, 0.01), (0.3, 0.1), (0.2, 0.03), (0.2, 0.07)):
        sols.append(solve_gap(V.scaled(lam), 0, ThermoPoint(T, 1.0)))
    sols.append(solve_gap_T0(V.scaled(0.2), 0, 1.0))
    return sols


def suite_linear_criterion(mu=1.0, lams=(0.2, 0.3), temps=(0.06, 0.12)):
    V = reference_potential()
    rows, ok = [], True
    for lam in lams:
        for T in temps:
            W = V.scaled(lam)
            pt = ThermoPoint(T, mu)
            linear = bs_lowest_eigenvalue(W, 0, pt) < -1.0
            nonlinear = not solve_gap(W, 0, pt).trivial
            rows.append((lam, T, linear, nonlinear))
            ok &= linear == nonlinear
    W = V.scaled(lams[0])
    tc_bs = critical_temperature(W, mu, TcOptions(ell_max=0)).tc
    tc_nl, _ = tc_nonlinear(W, mu, rtol=1e-5)
    rel = abs(tc_nl - tc_bs) / tc_bs
    ok &= rel <= 1e-3
    calls = "; ".join(f"(lam={r[0]}, T={r[1]}) lin={r[2]} gap={r[3]}" for r in rows)
    return ok, f"{calls}; Tc rel.diff {rel:.2e}", {"grid": rows, "tc_bs": tc_bs,
                                                    "tc_nonlinear": tc_nl, "rel": rel}


def suite_gap_residual():
    res = [verify_gap_residual(s) for s in _gap_samples() if not s.trivial]
    ok = bool(res) and max(res) <= 1e-8
    return ok, f"{len(res)} solutions, max residual {max(res):.2e}", {"residuals": res}


def constraint_defects(sol):
    """``(range violation, identity defect, min of (K^2 - E^2)/(4K^2))`` nodewise."""
    g, a = sol.gamma_hat, sol.alpha_hat
    K = sol.k_delta
    E = np.hypot(sol.xi, sol.delta)
    rng = float(max(np.max(-g), np.max(g - 1.0), 0.0))
    rhs = (K - E) * (K + E) / (4.0 * K * K)
    ident = float(np.max(np.abs(g * (1.0 - g) - a * a - rhs)))
    return rng, ident, float(np.min(rhs))


def suite_constraints():
    worst = [0.0, 0.0, math.inf]
    for s in _gap_samples():
        r, i, m = constraint_defects(s)
        worst = [max(worst[0], r), max(worst[1], i), min(worst[2], m)]
    ok = worst[0] <= 1e-12 and worst[1] <= 1e-12 and worst[2] >= -1e-12
    return ok, (f"range violation {worst[0]:.1e}, identity defect {worst[1]:.1e}, "
                f"min rhs {worst[2]:.1e}"), {"worst": worst}


# -- 8 ----------------------------------------------------------------------

def _builtin_families():
    r = np.linspace(0.0, 6.0, 121)
    return [RadialPotential.gaussian(1.5, 0.8), RadialPotential.square_well(1.0, 1.2),
            RadialPotential.exponential(0.7, 0.5),
            RadialPotential.tabulated(r[1:], -np.exp(-r[1:] ** 2) * (1 + 0.3 * r[1:]))]


def suite_channel_kernel(mu=1.0, ell_max=40):
    grid = GridOptions(cutoff=6.0, points_per_panel=8).build(mu, 0.2)
    route, rule = 0.0, 0.0
    for V in _builtin_families():
        for ell in (0, 1, 2):
            a = channel_kernel_position(V, ell, grid).matrix
            b = channel_kernel_momentum(V, ell, grid).matrix
            route = max(route, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
        kf = math.sqrt(mu)
        es = [kernel_values(V, ell, [kf], [kf])[0, 0] for ell in range(ell_max + 1)]
        total = sum((2 * ell + 1) * e for ell, e in enumerate(es))
        target = V.volume_integral() / (2.0 * math.pi ** 2)
        rule = max(rule, abs(total - target) / abs(target))
    ok = route <= 1e-8 and rule <= 1e-6
    return ok, f"route agreement {route:.1e}, sum rule {rule:.1e}", \
        {"route": route, "sum_rule": rule, "nodes": grid.size}


# -- 9 ----------------------------------------------------------------------

def suite_scattering():
    errs = []
    for V in (RadialPotential.gaussian(1.0, 1.0), RadialPotential.gaussian(0.6, 1.0),
              RadialPotential.square_well(1.0, 1.0), RadialPotential.square_well(2.2, 1.0)):
        a = scattering_length(V).a
        errs.append(abs(a - scattering_length_ode(V)) / abs(a))
    a1 = scattering_length(RadialPotential.square_well(1.0, 1.0)).a
    ref = 1.0 - math.tan(1.0)
    ok = max(errs) <= 1e-6 and abs(a1 - ref) <= 1e-6 * abs(ref)
    return ok, f"resolvent vs ODE {max(errs):.1e}; depth-1 well a={a1:.8f} (1-tan 1={ref:.8f})", \
        {"errors": errs, "a_depth1": a1}


# -- 10 ---------------------------------------------------------------------

def suite_low_density(mus=(1e-1, 1e-2, 1e-3)):
    V = RadialPotential.square_well(2.2, 1.0)
    a = scattering_length(V).a
    devs = []
    for mu in mus:
        tc = critical_temperature(V, mu, TcOptions(ell_max=0)).tc
        devs.append(abs(math.log(mu / tc) + math.pi / (2 * math.sqrt(mu) * a) + M_MU_CONSTANT))
    ok = _strictly_decreasing(devs)
    return ok, f"a={a:.5f}, |deviation| {_fmt(devs)}", {"mu": list(mus), "deviation": devs, "a": a}


# -- 11 ---------------------------------------------------------------------

def suite_zero_range(a=-1.0, mu=1.0):
    tc = tc_zero_range(a, mu)
    fr = (0.05, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99, 0.999)
    gaps = [gap_zero_range(a, mu, f * tc, tc=tc) for f in fr]
    at_tc = gap_zero_range(a, mu, tc, tc=tc)
    mono = _strictly_decreasing(gaps) and gaps[-1] > 0
    rels = []
    for aa in (-1.0, -0.3, -0.1):
        z = tc_zero_range(aa, mu)
        f = tc_low_density_formula(aa, mu)
        rels.append(abs(z - f) / f)
    ok = mono and abs(at_tc) <= 1e-6 * gaps[0] and _strictly_decreasing(rels)
    return ok, (f"Tc={tc:.6g}, Delta decreasing={mono}, Delta(Tc)={at_tc:.1e}, "
                f"formula rel.diff {_fmt(rels)}"), {"tc": tc, "gaps": gaps, "rel": rels}


# -- 12, 13 -----------------------------------------------------------------

def suite_gl_covariance(lam=0.2, mu=1.0, N=6):
    V = reference_potential().scaled(lam)
    c1 = gl_coefficients(V, mu)
    c2 = gl_coefficients(V, mu, tc=c1.tc, scale=2.0)
    r = [b / a for a, b in zip(c1.as_tuple(), c2.as_tuple())]
    cov = max(abs(r[0] - 4), abs(r[3] - 4), abs(r[1] - 1), abs(r[2] - 1))
    fields = ExternalFields.cosine_W(2, 0.5)
    D = critical_D(fields, c1.lambda1, c1.lambda2, N=N) + 1.0
    opts = GLMinOptions(N=N, gtol=1e-11)
    e1 = c1.lambda0 * minimize_gl(fields, c1, D, opts).energy
    e2 = c2.lambda0 * minimize_gl(fields, c2, D, opts).energy
    inv = abs(e1 - e2) / abs(e1)
    ok = cov <= 1e-12 and inv <= 1e-8
    return ok, f"ratios {_fmt(r)} (defect {cov:.1e}); lambda0 min E rel.diff {inv:.1e}", \
        {"ratios": r, "invariance": inv}


def suite_gl_exactness(N=8):
    errs = {}
    lam1, lam2, lam3, D = 1.3, 0.8, 1.7, 1.1
    res = minimize_gl(ExternalFields.zero(2), (lam1, lam2, lam3), D, GLMinOptions(N=N))
    errs["energy"] = abs(res.energy + lam2 ** 2 * D ** 2 / (4 * lam3))
    rho = np.abs(res.psi.real_space()) ** 2
    errs["density"] = float(np.max(np.abs(rho - D * lam2 / (2 * lam3))))
    errs["dc_zero"] = abs(critical_D(ExternalFields.zero(2), lam1, lam2, N=N))
    errs["dc_W"] = abs(critical_D(ExternalFields.constant(2, 0.5), lam1, lam2, N=N)
                       - lam1 * 0.5 / lam2)
    a = np.array([0.37, -1.1])
    n = np.arange(-3, 4)
    best = min(float(np.sum((2 * math.pi * np.array([i, j]) + 2 * a) ** 2)) for i in n for j in n)
    errs["dc_A"] = abs(critical_D(ExternalFields.constant(2, 0.0, a), lam1, lam2, N=N)
                       - best / lam2)
    # gradient against central differences with fields on
    rng = np.random.default_rng(7)
    W = np.zeros((3, 3), complex)
    W[1, 1], W[2, 1], W[0, 1], W[1, 2], W[1, 0] = 0.2, 0.3 + 0.1j, 0.3 - 0.1j, -0.4j, 0.4j
    A = np.zeros((2, 3, 3), complex)
    A[0, 1, 1], A[0, 1, 2], A[0, 1, 0] = 0.3, 0.2 + 0.05j, 0.2 - 0.05j
    A[1, 2, 2], A[1, 0, 0] = 0.1 - 0.1j, 0.1 + 0.1j
    f = ExternalFields(2, 1, W, A)
    c = 0.3 * (rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7)))
    co = (lam1, lam2, lam3)
    _, g = gl_energy_and_gradient(PeriodicField(2, 3, c), f, co, D)
    h, worst = 1e-6, 0.0
    for _ in range(12):
        i, j = rng.integers(0, 7, 2)
        for part in (1.0, 1j):
            cp, cm = c.copy(), c.copy()
            cp[i, j] += h * part
            cm[i, j] -= h * part
            fd = (gl_energy(PeriodicField(2, 3, cp), f, co, D)
                  - gl_energy(PeriodicField(2, 3, cm), f, co, D)) / (2 * h)
            an = 2 * (g[i, j].real if part == 1.0 else g[i, j].imag)
            worst = max(worst, abs(fd - an) / max(abs(an), 1e-3))
    errs["gradient"] = worst
    ok = (errs["energy"] <= 1e-8 and errs["density"] <= 1e-8 and errs["dc_zero"] <= 1e-8
          and errs["dc_W"] <= 1e-8 and errs["dc_A"] <= 1e-8 and errs["gradient"] <= 1e-6)
    return ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()), errs


# -- 14 ---------------------------------------------------------------------

def suite_translation_invariance():
    V = reference_potential()
    worst_l, worst_o = 0.0, 1.0
    for lam, T in ((0.3, 0.01), (0.3, 0.05), (0.2, 0.03)):
        sol = solve_gap(V.scaled(lam), 0, ThermoPoint(T, 1.0))
        lam_min, _, ov = check_translation_invariance_condition(sol, return_vector=True)
        worst_l = max(worst_l, abs(lam_min))
        worst_o = min(worst_o, ov)
    ok = worst_l <= 1e-6 and worst_o >= 0.999
    return ok, f"max |lowest eigenvalue| {worst_l:.1e}, min overlap {worst_o:.6f}", \
        {"eigenvalue": worst_l, "overlap": worst_o}


SUITES = {
    "universal-ratio": (1, suite_universal_ratio),
    "m-mu-asymptotics": (2, suite_m_mu),
    "weak-coupling": (3, suite_weak_coupling),
    "refined-constant": (4, suite_refined_constant),
    "linear-criterion": (5, suite_linear_criterion),
    "gap-residual": (6, suite_gap_residual),
    "constraint-identities": (7, suite_constraints),
    "channel-kernel": (8, suite_channel_kernel),
    "scattering-length": (9, suite_scattering),
    "low-density": (10, suite_low_density),
    "zero-range": (11, suite_zero_range),
    "gl-covariance": (12, suite_gl_covariance),
    "gl-exactness": (13, suite_gl_exactness),
    "translation-invariance": (14, suite_translation_invariance),
}


def run_suite(name):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    crit, fn = SUITES[name]
    t0 = time.perf_counter()
    ok, detail, values = fn()
    return SuiteResult(name, crit, bool(ok), detail, values, time.perf_counter() - t0)


def run_suites(names=None):
    return [run_suite(n) for n in (names or list(SUITES))]
