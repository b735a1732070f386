"""Channel-reduced BCS gap equation at T >= 0.

For a gap ``Delta(p)`` in angular channel ``ell`` the equation reads

    Delta(p) = -int_0^inf q^2 K_ell(p, q) Delta(q) / K_T^Delta(q) dq,

with ``K_T^Delta = E / tanh(E / 2T)`` and ``E = sqrt((p^2 - mu)^2 + Delta^2)``.
The pair function and momentum distribution are

    alpha_hat = Delta / (2 K_T^Delta),    gamma_hat = 1/2 - (p^2 - mu) / (2 K_T^Delta),

and ``(K_T^Delta + V) alpha_hat = 0``.

Free energies are densities of the momentum-space functional
``int (p^2 - mu) gamma dp + <alpha, V alpha> - T S`` over R^3 with
``dp = 4 pi p^2 dp``; for ``ell > 0`` the angular factor is taken as that of a
radial function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq, minimize_scalar
from scipy.special import expit, xlogy

from .dispersion import ThermoPoint, _x_coth
from .dispersion import xi as xi_of
from .errors import ConvergenceError, InvalidParameterError, NumericalError
from .potential import RadialPotential, channel_kernel_position, kernel_values
from .specfun import GridOptions, RadialGrid

__all__ = [
    "GapOptions",
    "GapSolution",
    "solve_gap",
    "solve_gap_T0",
    "free_energy",
    "energy_gap",
    "verify_gap_residual",
    "check_translation_invariance_condition",
    "interpolate_delta",
    "gap_map",
]


@dataclass(frozen=True)
class GapOptions:
    """Solver controls.

    Attributes
    ----------
    damping : float
        Mixing ``eta`` in ``Delta <- (1 - eta) Delta + eta F(Delta)``.
    max_iter : int
        Fixed-point iteration budget.
    tol : float
        Target for the relative sup-norm defect ``|Delta - F(Delta)| / |Delta|``.
    initial_amplitude : float or None
        ``A`` in ``Delta_0 = A K_ell(p, sqrt(mu))``; default ``0.1 max(T, 0.01 mu)``.
    trivial_floor : float
        Normal phase is declared once ``|Delta| < trivial_floor * |Delta_0|``.
    refine : bool
        After the fixed-point budget, switch to amplitude bisection on the
        scalar consistency equation followed by Newton polishing.
    grid : GridOptions
    """

    damping: float = 0.5
    max_iter: int = 300
    tol: float = 1e-11
    initial_amplitude: float | None = None
    trivial_floor: float = 1e-12
    refine: bool = True
    max_newton: int = 30
    grid: GridOptions = field(default_factory=GridOptions)

    def __post_init__(self):
        if not (0.0 < self.damping <= 1.0):
            raise InvalidParameterError("damping must be in (0, 1]", module="gapsolve")
        if self.max_iter < 0 or self.tol <= 0:
            raise InvalidParameterError("bad iteration controls", module="gapsolve")


@dataclass(frozen=True, eq=False)
class GapSolution:
    """Converged gap function with reconstructed pair state."""

    grid: RadialGrid
    ell: int
    delta: np.ndarray
    alpha_hat: np.ndarray
    gamma_hat: np.ndarray
    pt: ThermoPoint
    free_energy_density: float
    normal_free_energy_density: float
    residual: float
    iterations: int
    converged: bool
    potential: RadialPotential | None = None
    method: str = "fixed_point"

    @property
    def trivial(self):
        return not np.any(self.delta)

    @property
    def k_delta(self):
        return _x_coth(np.hypot(self.xi, self.delta), self.pt.T)

    @property
    def xi(self):
        return xi_of(self.grid.nodes, self.pt.mu)


# -- pointwise pieces -------------------------------------------------------

def _inv_k(E, T):
    """``1 / K_T^Delta = tanh(E/2T) / E`` (``1/E`` at ``T = 0``)."""
    return 1.0 / _x_coth(E, T)


def _d_inv_k(E, T):
    """Derivative of ``tanh(E/2T)/E`` with respect to ``E``."""
    if T == 0:
        return -1.0 / (E * E)
    z = E / (2.0 * T)
    small = z < 1e-4
    zs = np.where(small, 1.0, z)
    sech2 = 1.0 / np.cosh(np.minimum(zs, 350.0)) ** 2
    h = (zs * sech2 - np.tanh(zs)) / zs ** 2
    h = np.where(small, -2.0 * z / 3.0 + 8.0 * z ** 3 / 15.0, h)
    return h / (4.0 * T * T)


def _k_minus_abs_xi(xi, delta, T):
    """``K_T^Delta - |xi| >= 0`` without cancellation."""
    a = np.abs(xi)
    E = np.hypot(a, delta)
    out = delta * delta / (E + a)
    if T > 0:
        with np.errstate(over="ignore"):
            out = out + 2.0 * E / np.expm1(E / T)
        out = np.where(E == 0, 2.0 * T, out)
    return out


def _pair_state(xi, delta, T):
    """Return ``(K, alpha_hat, gamma_hat)`` with gamma accurate in both tails."""
    E = np.hypot(xi, delta)
    K = _x_coth(E, T)
    d = _k_minus_abs_xi(xi, delta, T)
    low = d / (2.0 * K)
    gamma = np.where(xi > 0, low, 1.0 - low)
    alpha = delta / (2.0 * K)
    return K, alpha, gamma


def gap_map(kmat, wq2, delta, xi, T):
    """``F(Delta) = -sum_j K_ij w_j q_j^2 Delta_j / K_T^Delta(q_j)``."""
    E = np.hypot(xi, delta)
    return -kmat @ (wq2 * delta * _inv_k(E, T))


def _defect(kmat, wq2, delta, xi, T):
    F = gap_map(kmat, wq2, delta, xi, T)
    nrm = np.max(np.abs(delta))
    return F, (np.max(np.abs(delta - F)) / nrm if nrm > 0 else 0.0)


# -- refinement -------------------------------------------------------------

def _lowest_pair(mat):
    w, v = sla.eigh(mat, subset_by_index=[0, 0], check_finite=False)
    return float(w[0]), v[:, 0]


def _amplitude_refine(kmat, wq2, shape, xi, T, tol, max_outer=40):
    """Fix the profile, solve for the amplitude at which the pair operator has
    eigenvalue -1, update the profile from the eigenvector, repeat.

    Returns the gap, or ``None`` when even zero amplitude fails the criterion
    (normal phase).
    """
    shape = shape / np.max(np.abs(shape))

    def op(a):
        u = np.sqrt(wq2 * _inv_k(np.hypot(xi, a * shape), T))
        return u, u[:, None] * kmat * u[None, :]

    def h(log_a):
        return _lowest_pair(op(math.exp(log_a))[1])[0] + 1.0

    u0, A0 = op(0.0)
    if _lowest_pair(A0)[0] + 1.0 >= 0.0:
        return None
    delta = shape
    scale = np.max(np.abs(xi)) + 1.0
    for _ in range(max_outer):
        lo = math.log(max(1e-300, 1e-30 * scale))
        if h(lo) >= 0.0:
            return None
        hi = math.log(scale)
        while h(hi) < 0.0:
            hi += math.log(4.0)
            if hi > math.log(1e30 * scale):
                raise NumericalError("amplitude bracket not found", module="gapsolve")
        # shrink the lower end geometrically before the root find
        mid = hi - math.log(4.0)
        while mid > lo and h(mid) > 0.0:
            hi, mid = mid, mid - math.log(4.0)
        lo = max(lo, mid)
        log_a = brentq(h, lo, hi, xtol=1e-14, rtol=1e-14)
        a = math.exp(log_a)
        u, A = op(a)
        _, y = _lowest_pair(A)
        new = y / u
        new = new / new[np.argmax(np.abs(new))]
        new_shape_err = np.max(np.abs(new - shape))
        shape = new
        delta = a * shape
        if new_shape_err < max(tol, 1e-13):
            break
    return delta


def _newton(kmat, wq2, delta, xi, T, tol, max_iter):
    """Newton polishing of ``G(Delta) = Delta - F(Delta) = 0``."""
    n = delta.size
    F, res = _defect(kmat, wq2, delta, xi, T)
    it = 0
    for it in range(1, max_iter + 1):
        if res <= tol:
            break
        E = np.hypot(xi, delta)
        dg = _inv_k(E, T) + np.where(E > 0, delta * delta / np.where(E > 0, E, 1.0), 0.0) \
            * _d_inv_k(np.where(E > 0, E, 1.0), T)
        J = np.eye(n) + kmat * (wq2 * dg)[None, :]
        step = sla.solve(J, -(delta - F), check_finite=False)
        t = 1.0
        while True:
            trial = delta + t * step
            Ft, rt = _defect(kmat, wq2, trial, xi, T)
            if rt < res or t < 1e-3:
                break
            t *= 0.5
        delta, F, res = trial, Ft, rt
    return delta, res, it


# -- main solvers -----------------------------------------------------------

def _initial_guess(V, ell, grid, mu, T, opts):
    amp = opts.initial_amplitude
    if amp is None:
        amp = 0.1 * max(T, 0.01 * abs(mu) if mu != 0 else 0.01)
    if mu > 0:
        shape = kernel_values(V, ell, grid.nodes, [math.sqrt(mu)])[:, 0]
    else:
        shape = kernel_values(V, ell, grid.nodes, [grid.nodes[0]])[:, 0]
        shape = shape / max(np.max(np.abs(shape)), 1e-300)
    return amp * shape


def _fix_sign(delta, grid):
    i = int(np.argmin(np.abs(grid.nodes - grid.fermi_momentum))) if grid.fermi_momentum > 0 \
        else int(np.argmax(np.abs(delta)))
    if delta[i] < 0 or (delta[i] == 0 and np.sum(delta) < 0):
        return -delta
    return delta


def _solve_on_grid(V, ell, pt, grid, opts, delta0=None):
    kmat = channel_kernel_position(V, ell, grid).matrix
    p = grid.nodes
    wq2 = grid.weights * p * p
    xi = xi_of(p, pt.mu)
    T = pt.T
    delta = _initial_guess(V, ell, grid, pt.mu, T, opts) if delta0 is None else delta0
    amp0 = np.max(np.abs(delta))
    if amp0 == 0 or not np.all(np.isfinite(delta)):
        return np.zeros_like(p), 0.0, 0, "trivial"
    eta = opts.damping
    res = math.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        F, res = _defect(kmat, wq2, delta, xi, T)
        if not np.all(np.isfinite(F)):
            raise NumericalError("non-finite gap iterate", module="gapsolve")
        if res <= opts.tol:
            return delta, res, it, "fixed_point"
        delta = (1.0 - eta) * delta + eta * F
        if np.max(np.abs(delta)) < opts.trivial_floor * amp0:
            return np.zeros_like(p), 0.0, it, "fixed_point"
    if not opts.refine:
        raise ConvergenceError(f"gap iteration did not converge in {opts.max_iter} steps",
                               module="gapsolve", residual=res)
    refined = _amplitude_refine(kmat, wq2, delta, xi, T, opts.tol)
    if refined is None:
        return np.zeros_like(p), 0.0, it, "amplitude"
    delta, res, nit = _newton(kmat, wq2, refined, xi, T, opts.tol, opts.max_newton)
    if res > opts.tol:
        raise ConvergenceError("Newton polishing did not reach tolerance",
                               module="gapsolve", residual=res)
    return delta, res, it + nit, "amplitude+newton"


def _package(V, ell, pt, grid, delta, res, iters, method):
    delta = _fix_sign(delta, grid)
    xi = xi_of(grid.nodes, pt.mu)
    _, alpha, gamma = _pair_state(xi, delta, pt.T)
    sol = GapSolution(grid, ell, delta, alpha, gamma, pt, math.nan, math.nan, res, iters,
                      True, V, method)
    F, Fn = _free_energies(sol)
    sol = replace(sol, free_energy_density=F, normal_free_energy_density=Fn)
    for arr in (sol.delta, sol.alpha_hat, sol.gamma_hat):
        arr.setflags(write=False)
    return sol


def solve_gap(V, ell, pt, opts=None):
    """Solve the gap equation at ``pt.T > 0`` in channel ``ell``.

    The grid resolves the Fermi surface down to an energy window ``T``.  The
    default iteration is damped fixed point; if it has not settled within
    ``opts.max_iter`` steps (critical slowing near ``T_c``) the amplitude
    refinement and Newton polish take over.  The normal phase is returned as
    an all-zero gap with ``converged=True``.

    Raises
    ------
    ConvergenceError
        Tolerance not reached; carries the last defect.
    NumericalError
        Non-finite kernel or iterate.
    """
    opts = opts or GapOptions()
    if pt.T == 0:
        return solve_gap_T0(V, ell, pt.mu, opts)
    grid = opts.grid.build(pt.mu, pt.T)
    delta, res, it, method = _solve_on_grid(V, int(ell), pt, grid, opts)
    return _package(V, int(ell), pt, grid, delta, res, it, method)


def solve_gap_T0(V, ell, mu, opts=None, max_regrid=30):
    """Zero-temperature gap equation ``Delta = -int q^2 K Delta / E dq``.

    The Fermi-surface resolution starts at ``0.01 |mu|`` and is lowered to a
    quarter of the current ``|Delta(sqrt(mu))|`` until the grid resolves the gap.
    """
    opts = opts or GapOptions()
    pt = ThermoPoint(0.0, mu)
    scale = 0.01 * max(abs(mu), 1e-300) if mu != 0 else 0.01
    floor = 1e-12 * max(abs(mu), 1.0)
    delta0 = None
    for _ in range(max_regrid):
        grid = opts.grid.build(mu, scale)
        guess = None
        if delta0 is not None:
            guess = interpolate_delta(delta0, V, grid.nodes)
        amp_opts = opts if opts.initial_amplitude is not None else \
            replace(opts, initial_amplitude=0.1 * scale)
        delta, res, it, method = _solve_on_grid(V, int(ell), pt, grid, amp_opts, guess)
        sol = _package(V, int(ell), pt, grid, delta, res, it, method)
        if mu <= 0:
            return sol
        if sol.trivial:
            if scale <= floor:
                return sol
            scale = max(0.01 * scale, floor)
            delta0 = None
            continue
        d_f = abs(float(interpolate_delta(sol, V, [math.sqrt(mu)])[0]))
        if scale <= d_f:
            return sol
        scale = max(0.25 * d_f, floor)
        delta0 = sol
    raise ConvergenceError("zero-temperature regridding did not settle", module="gapsolve")


def interpolate_delta(sol, V, p):
    """Nystrom interpolation ``Delta(p) = -sum_j K(p, q_j) w_j q_j^2 Delta_j / K_j``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if sol.trivial:
        return np.zeros_like(p)
    q = sol.grid.nodes
    row = kernel_values(V, sol.ell, p, q)
    return -row @ (sol.grid.weights * q * q * sol.delta / sol.k_delta)


# -- observables ------------------------------------------------------------

def _free_energies(sol):
    g = sol.grid
    p = g.nodes
    T = sol.pt.T
    xi = xi_of(p, sol.pt.mu)
    w4 = 4.0 * math.pi * g.weights * p * p
    kin = xi * sol.gamma_hat
    if T > 0:
        E = np.hypot(xi, sol.delta)
        nu_p, nu_m = expit(E / T), expit(-E / T)
        ent = xlogy(nu_p, nu_p) + xlogy(nu_m, nu_m)
        local = kin + T * ent
        normal = -T * np.logaddexp(0.0, -xi / T)
    else:
        local = kin
        normal = np.where(xi < 0, xi, 0.0)
    Fn = float(np.dot(w4, normal))
    if sol.trivial:
        inter = 0.0
    else:
        kmat = channel_kernel_position(sol.potential, sol.ell, g).matrix
        u = g.weights * p * p * sol.alpha_hat
        inter = 4.0 * math.pi * float(u @ kmat @ u)
    return float(np.dot(w4, local)) + inter, Fn


def free_energy(sol):
    """Return ``(F, F_normal)`` free-energy densities for a solution.

    The 2x2 density matrix at each momentum has eigenvalues
    ``1/2 +- sqrt((gamma - 1/2)^2 + alpha^2)``, which for solver output equal
    ``1 / (1 + exp(-+E/T))``; the entropy uses that form.
    """
    return sol.free_energy_density, sol.normal_free_energy_density


def energy_gap(sol, V=None):
    """``Xi = inf_p E_Delta(p)`` refined between neighbouring nodes.

    Parameters
    ----------
    sol : GapSolution
    V : RadialPotential, optional
        Needed for off-node refinement; defaults to ``sol.potential``.
    """
    V = V or sol.potential
    p = sol.grid.nodes
    mu = sol.pt.mu
    if sol.trivial:
        return 0.0 if mu >= 0 else -mu
    E = np.hypot(xi_of(p, mu), sol.delta)
    i = int(np.argmin(E))
    if V is None:
        return float(E[i])
    lo = p[max(i - 1, 0)]
    hi = p[min(i + 1, p.size - 1)]

    def e_at(x):
        d = interpolate_delta(sol, V, [x])[0]
        return math.hypot(x * x - mu, d)

    r = minimize_scalar(e_at, bounds=(lo, hi), method="bounded",
                        options={"xatol": 1e-14 * max(hi, 1.0)})
    return float(min(r.fun, E[i]))


def _weighted_norm(grid, f):
    return math.sqrt(float(np.dot(grid.weights * grid.nodes ** 2, f * f)))


def verify_gap_residual(sol, V=None):
    """``|K_T^Delta alpha + V alpha| / |alpha|`` in ``L^2(p^2 dp)``; 0 if trivial."""
    V = V or sol.potential
    if sol.trivial:
        return 0.0
    g = sol.grid
    kmat = channel_kernel_position(V, sol.ell, g).matrix
    wq2 = g.weights * g.nodes ** 2
    a = sol.alpha_hat
    r = sol.k_delta * a + kmat @ (wq2 * a)
    return _weighted_norm(g, r) / _weighted_norm(g, a)


def check_translation_invariance_condition(sol, V=None, return_vector=False):
    """Lowest eigenvalue of ``K_T^Delta + V`` in the solution's channel.

    The operator is discretized symmetrically as
    ``diag(K_T^Delta) + s K s`` with ``s = sqrt(w) p``.  For a nontrivial
    solution the eigenvalue is near zero with eigenvector proportional to
    ``s alpha_hat``; the overlap is returned alongside when requested.
    """
    V = V or sol.potential
    g = sol.grid
    kmat = channel_kernel_position(V, sol.ell, g).matrix
    s = np.sqrt(g.weights) * g.nodes
    M = np.diag(sol.k_delta) + s[:, None] * kmat * s[None, :]
    try:
        lam, vec = _lowest_pair(M)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed: {exc}", module="gapsolve") from exc
    if not return_vector:
        return lam
    ref = s * sol.alpha_hat
    nrm = np.linalg.norm(ref)
    overlap = abs(float(vec @ ref)) / nrm if nrm > 0 else 0.0
    return lam, vec, overlap
