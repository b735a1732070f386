"""Critical temperature through the Birman-Schwinger criterion and its asymptotics.

In channel ``ell`` at temperature ``T`` the symmetric matrix

    A_ij = sqrt(w_i) p_i K_T(p_i)^{-1/2} K_ell(p_i, p_j) K_T(p_j)^{-1/2} p_j sqrt(w_j)

is isospectral to the discretized ``K_T^{-1/2} V K_T^{-1/2}``.  ``K_T + V``
has a negative eigenvalue iff the lowest eigenvalue of ``A`` is below -1, and
that eigenvalue increases with ``T``; ``T_c`` is where it crosses -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .dispersion import (EULER_GAMMA, M_MU_CONSTANT, ThermoPoint, k_T, m_mu,
                         subtracted_integral)
from .errors import AccuracyError, DomainError, InvalidParameterError, NumericalError
from .gapsolve import GapOptions, energy_gap, solve_gap_T0
from .potential import channel_kernel_position, fourier_transform, kernel_values
from .specfun import GridOptions

__all__ = [
    "ChannelOperator",
    "TcOptions",
    "TcReport",
    "channel_operator",
    "bs_lowest_eigenvalue",
    "critical_temperature",
    "e_channel",
    "w_channel",
    "w_channel_bracket",
    "b_mu",
    "TC_PREFACTOR",
    "UNIVERSAL_RATIO",
    "tc_weak_coupling_formula",
    "tc_leading_order",
    "tc_low_density_formula",
    "tc_zero_range",
    "gap_zero_range",
    "universal_ratio",
    "tc_nonlinear",
]

# mu (8/pi) e^{gamma - 2}
TC_PREFACTOR = math.exp(M_MU_CONSTANT)
UNIVERSAL_RATIO = math.pi / math.exp(EULER_GAMMA)


@dataclass(frozen=True, eq=False)
class ChannelOperator:
    ell: int
    pt: ThermoPoint
    grid: object
    matrix: np.ndarray
    lowest_eigenvalue: float
    lowest_eigenvector: np.ndarray

    def alpha_profile(self):
        """Momentum profile ``alpha(p_i)`` of the lowest eigenvector.

        ``alpha = K_T^{-1/2} y / (sqrt(w) p)`` solves ``(K_T + V/e) alpha = 0``
        where ``e`` is minus the eigenvalue; normalized to unit ``L^2(p^2 dp)``.
        """
        g = self.grid
        kt = k_T(g.nodes, self.pt)
        a = self.lowest_eigenvector / (np.sqrt(g.weights) * g.nodes * np.sqrt(kt))
        a = a / math.sqrt(float(np.dot(g.weights * g.nodes ** 2, a * a)))
        i = int(np.argmax(np.abs(a)))
        return a if a[i] > 0 else -a


def channel_operator(V, ell, pt, grid=None, grid_opts=None):
    """Assemble the channel Birman-Schwinger matrix and its lowest eigenpair."""
    if pt.T <= 0:
        raise DomainError("Birman-Schwinger operator needs T > 0", module="tcrit")
    if grid is None:
        grid = (grid_opts or GridOptions()).build(pt.mu, pt.T)
    kmat = channel_kernel_position(V, ell, grid).matrix
    u = np.sqrt(grid.weights) * grid.nodes / np.sqrt(k_T(grid.nodes, pt))
    A = u[:, None] * kmat * u[None, :]
    try:
        lam, vec = sla.eigh(A, subset_by_index=[0, 0], check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed: {exc}", module="tcrit") from exc
    return ChannelOperator(int(ell), pt, grid, A, float(lam[0]), vec[:, 0])


def bs_lowest_eigenvalue(V, ell, pt, grid=None, grid_opts=None):
    """Lowest eigenvalue of the channel Birman-Schwinger matrix."""
    return channel_operator(V, ell, pt, grid, grid_opts).lowest_eigenvalue


@dataclass(frozen=True)
class TcOptions:
    """``T_c`` search controls; ``T_floor``/``T_ceiling`` default to
    ``1e-12 max(mu, 1)`` and ``10 max(|mu|, 1)``."""

    ell_max: int = 8
    rtol: float = 1e-6
    T_floor: float | None = None
    T_ceiling: float | None = None
    degeneracy_tol: float = 1e-8
    grid: GridOptions = field(default_factory=GridOptions)


@dataclass(frozen=True)
class TcReport:
    tc: float
    channel: int
    bracket: tuple
    eigen_trace: tuple
    degenerate: bool
    channel_tc: dict
    eigenvalue_at_tc: float = math.nan


def _bisect_channel(f, lo, hi, rtol, trace):
    """Root of the increasing ``f(log T)`` inside ``[lo, hi]`` (log scale)."""
    x = brentq(f, lo, hi, xtol=0.25 * rtol, rtol=4 * np.finfo(float).eps)
    half = math.log1p(0.5 * rtol)
    a, b = x - half, x + half
    fa, fb = f(a), f(b)
    # widen until the sign change is certified
    while fa > 0:
        a -= half
        fa = f(a)
    while fb < 0:
        b += half
        fb = f(b)
    return math.exp(x), (math.exp(a), math.exp(b))


def critical_temperature(V, mu, opts=None):
    """Critical temperature of ``V`` at chemical potential ``mu``.

    Each channel ``ell <= ell_max`` is searched in ``log T`` with a bracketing
    root finder on ``eigenvalue(T) + 1``, regenerating the grid at scale ``T``
    for every evaluation.  Channel 0 is solved first; another channel is
    searched only if its eigenvalue at the running maximum is already below
    -1.  ``T_c = 0`` when the eigenvalue at ``T_floor`` is ``>= -1``.

    Raises
    ------
    DomainError
        The eigenvalue is still below -1 at ``T_ceiling``.
    """
    opts = opts or TcOptions()
    floor = opts.T_floor if opts.T_floor is not None else 1e-12 * max(mu, 1.0)
    ceil = opts.T_ceiling if opts.T_ceiling is not None else 10.0 * max(abs(mu), 1.0)
    trace = []
    cache = {}

    def f(ell, logT):
        key = (ell, logT)
        if key not in cache:
            T = math.exp(logT)
            lam = bs_lowest_eigenvalue(V, ell, ThermoPoint(T, mu), grid_opts=opts.grid)
            cache[key] = lam
            trace.append((ell, T, lam))
        return cache[key] + 1.0

    lf, lc = math.log(floor), math.log(ceil)
    best_T, best_ell, best_bracket = 0.0, 0, (0.0, floor)
    channel_tc = {}
    degenerate = False

    for ell in range(opts.ell_max + 1):
        ref = math.log(best_T) if best_T > 0 else lf
        val = f(ell, ref)
        if best_T > 0 and abs(val) <= opts.degeneracy_tol:
            degenerate = True
        if val >= 0:
            channel_tc.setdefault(ell, 0.0 if best_T == 0 else None)
            continue
        if f(ell, lc) < 0:
            raise DomainError(f"T_c exceeds the search ceiling {ceil:g} (channel {ell})",
                              module="tcrit")
        # seed from the leading-order asymptotics when available
        lo, hi = ref, lc
        e = e_channel(V, ell, mu) if mu > 0 else 0.0
        if e < 0:
            seed = math.log(max(TC_PREFACTOR * mu, floor)) + 1.0 / (math.sqrt(mu) * e)
            seed = min(max(seed, lo), hi)
            if seed > lo:
                if f(ell, seed) < 0:
                    lo = seed
                    step = seed
                    while True:
                        step = min(step + math.log(4.0), hi)
                        if f(ell, step) >= 0 or step >= hi:
                            hi = step
                            break
                        lo = step
                else:
                    hi = seed
                    step = seed
                    while step > lo:
                        step = max(step - math.log(10.0), lo)
                        if f(ell, step) < 0:
                            lo = step
                            break
                        hi = step
        tc, bracket = _bisect_channel(lambda x: f(ell, x), lo, hi, opts.rtol, trace)
        channel_tc[ell] = tc
        if best_T > 0 and abs(tc - best_T) <= opts.degeneracy_tol * best_T:
            degenerate = True
        if tc > best_T:
            best_T, best_ell, best_bracket = tc, ell, bracket
    eig = bs_lowest_eigenvalue(V, best_ell, ThermoPoint(best_T, mu), grid_opts=opts.grid) \
        if best_T > 0 else math.nan
    return TcReport(best_T, best_ell, best_bracket, tuple(trace), degenerate, channel_tc, eig)


# -- sphere operators -----------------------------------------------------

def e_channel(V, ell, mu):
    """Eigenvalue of the Fermi-sphere operator in channel ``ell``: ``K_ell(kF, kF)``."""
    if not (mu > 0):
        raise DomainError("e_channel needs mu > 0", module="tcrit")
    kf = math.sqrt(mu)
    return float(kernel_values(V, ell, [kf], [kf])[0, 0])


def w_channel_bracket(V, ell, mu, T, grid_opts=None):
    """``int_0^inf p^2 B^2 / K_T dp - m_mu(T) e^2`` with ``B(p) = K_ell(p, kF)``.

    Evaluated as ``int [p^2 (B^2 - e^2)/K_T + e^2] dp`` minus the analytic
    tail of ``m_mu`` beyond the cutoff, which keeps the integrand bounded at
    the Fermi surface.
    """
    gopts = grid_opts or GridOptions()
    kf = math.sqrt(mu)
    g = gopts.build(mu, T)
    B = kernel_values(V, ell, g.nodes, [kf])[:, 0]
    e = e_channel(V, ell, mu)
    kt = k_T(g.nodes, ThermoPoint(T, mu))
    body = g.integrate(g.nodes ** 2 * (B * B - e * e) / kt + e * e)
    lam = g.cutoff
    tail = 0.5 * kf * math.log((lam + kf) / (lam - kf))
    return body - e * e * tail


def w_channel(V, ell, mu, ladder=(1e-6, 1e-7, 1e-8), grid_opts=None, rtol=1e-4):
    """Second-order channel coefficient ``w_ell`` as the ``T -> 0`` limit of the bracket.

    The bracket is evaluated at ``T = t * mu`` for ``t`` in ``ladder`` and
    Richardson-extrapolated assuming a correction linear in ``T``.

    Raises
    ------
    AccuracyError
        Ladder values drift by more than ``rtol`` relative (failed cancellation).
    """
    if not (mu > 0):
        raise DomainError("w_channel needs mu > 0", module="tcrit")
    ts = [t * mu for t in ladder]
    vals = [w_channel_bracket(V, ell, mu, T, grid_opts) for T in ts]
    scale = max(abs(vals[-1]), abs(e_channel(V, ell, mu)) ** 2 * math.sqrt(mu), 1e-300)
    drift = max(vals) - min(vals)
    if drift > rtol * scale:
        raise AccuracyError("w bracket not converged across the T ladder", module="tcrit",
                            residual=drift / scale)
    r = ts[-2] / ts[-1]
    return float(vals[-1] + (vals[-1] - vals[-2]) / (r - 1.0))


def b_mu(V, mu, lam, ell_max=8, w_zero=False, ladder=(1e-6, 1e-7, 1e-8), grid_opts=None):
    """``b_mu(lambda) = min_ell (lambda e_ell - lambda^2 w_ell)``.

    Returns ``(value, ell, details)`` where ``details`` holds per-channel
    ``(e, w, b)`` and ``"e_min_ell"``, the minimizer of ``e_ell`` alone.
    """
    if not (lam > 0):
        raise InvalidParameterError("lambda must be > 0", module="tcrit")
    chans = {}
    for ell in range(ell_max + 1):
        e = e_channel(V, ell, mu)
        w = 0.0 if w_zero else w_channel(V, ell, mu, ladder, grid_opts)
        chans[ell] = (e, w, lam * e - lam * lam * w)
    best = min(chans, key=lambda k: chans[k][2])
    e_min = min(chans, key=lambda k: chans[k][0])
    return chans[best][2], best, {"channels": chans, "e_min_ell": e_min}


def tc_weak_coupling_formula(V, mu, lam, b=None, **kw):
    """``T_c = mu (8/pi) e^{gamma - 2} exp(1 / (sqrt(mu) b_mu(lambda)))``."""
    if b is None:
        b = b_mu(V, mu, lam, **kw)[0]
    if b >= 0:
        raise DomainError("b_mu >= 0: no pairing predicted at this order", module="tcrit")
    return mu * TC_PREFACTOR * math.exp(1.0 / (math.sqrt(mu) * b))


def tc_leading_order(e, mu, lam):
    """Leading-order estimate ``mu C exp(1 / (sqrt(mu) lambda e))``."""
    if e >= 0:
        raise DomainError("e_mu >= 0", module="tcrit")
    return mu * TC_PREFACTOR * math.exp(1.0 / (math.sqrt(mu) * lam * e))


def tc_low_density_formula(a, mu):
    """``T_c = mu (8/pi) e^{gamma - 2} exp(pi / (2 sqrt(mu) a))`` for ``a < 0``."""
    if not (a < 0):
        raise DomainError("low-density formula needs a < 0", module="tcrit")
    if not (mu > 0):
        raise DomainError("mu must be > 0", module="tcrit")
    return mu * TC_PREFACTOR * math.exp(math.pi / (2.0 * math.sqrt(mu) * a))


# -- zero-range model -----------------------------------------------------

def _zr_check(a, mu):
    if not (a < 0):
        raise DomainError("zero-range model needs a < 0", module="tcrit")
    if not (mu > 0):
        raise DomainError("zero-range model needs mu > 0", module="tcrit")


def tc_zero_range(a, mu, rtol=1e-12):
    """Root of ``m_mu(T) = -pi / (2 a)`` (gap equation for numbers at ``Delta = 0``)."""
    _zr_check(a, mu)
    target = -math.pi / (2.0 * a)

    def f(logT):
        return m_mu(ThermoPoint(math.exp(logT), mu)) - target

    seed = math.log(tc_low_density_formula(a, mu))
    lo, hi = seed - 1.0, seed + 1.0
    while f(lo) < 0:
        lo -= 2.0
        if lo < math.log(1e-300):
            raise DomainError("no zero-range T_c in range", module="tcrit")
    while f(hi) > 0:
        hi += 2.0
        if hi > math.log(1e30 * mu):
            raise DomainError("no zero-range T_c in range", module="tcrit")
    return math.exp(brentq(f, lo, hi, xtol=1e-15, rtol=rtol))


def gap_zero_range(a, mu, T, tc=None, rtol=1e-12):
    """Constant gap solving ``int (p^2 tanh(E/2T)/E - 1) dp = -pi/(2a)``; 0 for ``T >= T_c``."""
    _zr_check(a, mu)
    if T < 0:
        raise InvalidParameterError("T must be >= 0", module="tcrit")
    tc = tc_zero_range(a, mu) if tc is None else tc
    if T >= tc:
        return 0.0
    target = -math.pi / (2.0 * a)

    def f(logd):
        return subtracted_integral(mu, T, math.exp(logd)) - target

    hi = math.log(max(tc, mu))
    while f(hi) > 0:
        hi += 1.0
    # start near the T = 0 gap 8 mu e^{-2} exp(pi / (2 sqrt(mu) a)); node
    # rounding near k_F limits gaps far below both T and 1e-9 mu
    est = 8.0 * mu * math.exp(-2.0 + math.pi / (2.0 * math.sqrt(mu) * a))
    lo = math.log(max(1e-8 * T, 1e-3 * min(est, tc)))
    if f(lo) < 0:
        if T > 0:
            return 0.0
        while f(lo) < 0:
            lo -= 2.0
    return math.exp(brentq(f, lo, hi, xtol=1e-15, rtol=rtol))


# -- universal ratio ------------------------------------------------------

@dataclass(frozen=True)
class RatioSample:
    lam: float
    gap: float
    tc: float

    @property
    def ratio(self):
        return self.gap / self.tc


def universal_ratio(V, mu, lambda_ladder, tc_opts=None, gap_opts=None, check_sign=True):
    """``Xi(lambda) / T_c(lambda)`` for the potentials ``lambda V``.

    Requires ``Vhat <= 0`` (sampled) so that the ground state is unique.
    """
    if check_sign:
        ps = np.linspace(0.0, 50.0 / max(V.range, 1e-3), 2001)
        vh = fourier_transform(V, ps)
        if np.any(vh > 1e-14 * np.max(np.abs(vh))) or not vh[0] < 0:
            raise DomainError("universal ratio needs Vhat <= 0 with Vhat(0) < 0",
                              module="tcrit")
    out = []
    for lam in lambda_ladder:
        W = V.scaled(lam)
        tc = critical_temperature(W, mu, tc_opts or TcOptions(ell_max=0)).tc
        sol = solve_gap_T0(W, 0, mu, gap_opts or GapOptions())
        out.append(RatioSample(float(lam), energy_gap(sol, W), tc))
    return out


# -- nonlinear criterion --------------------------------------------------

def tc_nonlinear(V, mu, ell=0, bracket=None, rtol=1e-4, gap_opts=None, max_expand=60):
    """``T_c`` as the point where the gap solver's answer turns trivial.

    Bisection in ``log T`` on the boolean "``solve_gap`` finds a nontrivial
    solution"; no eigenvalue information is used.  ``bracket`` defaults to
    an expansion from the leading-order estimate.

    Returns
    -------
    tc : float
        Geometric midpoint of the final bracket.
    bracket : tuple
        ``(T_lo, T_hi)`` with a nontrivial solution at ``T_lo`` and a trivial
        one at ``T_hi``.
    """
    from .gapsolve import solve_gap

    gopts = gap_opts or GapOptions()

    def nontrivial(T):
        return not solve_gap(V, ell, ThermoPoint(T, mu), gopts).trivial

    if bracket is None:
        e = e_channel(V, ell, mu) if mu > 0 else 0.0
        if not e < 0:
            raise DomainError("no attractive channel to seed the bracket", module="tcrit")
        T0 = TC_PREFACTOR * mu * math.exp(1.0 / (math.sqrt(mu) * e))
        lo = hi = T0
        for _ in range(max_expand):
            if nontrivial(lo):
                break
            hi, lo = lo, lo / 4.0
        else:
            raise DomainError("no superconducting temperature found", module="tcrit")
        for _ in range(max_expand):
            if hi > lo and not nontrivial(hi):
                break
            lo, hi = hi, hi * 4.0
        else:
            raise DomainError("gap stays nontrivial up to the search ceiling", module="tcrit")
    else:
        lo, hi = bracket
        if not (nontrivial(lo) and not nontrivial(hi)):
            raise InvalidParameterError("bracket does not straddle the transition",
                                        module="tcrit")
    while hi / lo - 1.0 > rtol:
        mid = math.sqrt(lo * hi)
        if nontrivial(mid):
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi), (lo, hi)
