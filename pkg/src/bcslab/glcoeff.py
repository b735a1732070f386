"""Ginzburg-Landau coefficients from the pair wavefunction at the critical temperature.

``alpha_0`` is the zero mode of ``K_{T_c} + V`` in the s-wave channel and
``t = 2 K_{T_c} alpha_hat_0``.  With ``beta = 1/T_c``, ``xi = q^2 - mu`` and the
measure ``dq / (2 pi)^3 = q^2 dq / (2 pi^2)``:

    lambda0 = 1/(16 T_c^2) int t^2 (g1(beta xi) + (2/3) beta q^2 g2(beta xi))
    lambda1 = 1/(4 T_c^2 lambda0) int t^2 g1(beta xi)
    lambda2 = 1/(8 T_c lambda0) int t^2 cosh^{-2}(beta xi / 2)
    lambda3 = 1/(16 T_c^2 lambda0) int t^4 beta g1(beta xi) / (beta xi)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_jn

from .dispersion import ThermoPoint, g1, g1_over_z, g2, k_T
from .dispersion import xi as xi_of
from .errors import AccuracyError, DomainError, InvalidParameterError
from .potential import radial_rule
from .specfun import GridOptions, RadialGrid
from .tcrit import TcOptions, channel_operator, critical_temperature

__all__ = [
    "GLCoefficients",
    "t_profile",
    "compute_coefficients",
    "gl_coefficients",
    "pair_wavefunction",
    "ALPHA0_CONVENTION",
]

ALPHA0_CONVENTION = "unit L2(R^3) norm: 4 pi int q^2 alpha_hat^2 dq = 1"

_TWO_PI_32 = (2.0 * math.pi) ** 1.5


@dataclass(frozen=True, eq=False)
class GLCoefficients:
    lambda0: float
    lambda1: float
    lambda2: float
    lambda3: float
    tc: float
    mu: float
    t_profile: np.ndarray
    grid: RadialGrid
    alpha0_norm_convention: float = 1.0
    route_discrepancy: float = 0.0

    def __post_init__(self):
        vals = (self.lambda0, self.lambda1, self.lambda2, self.lambda3)
        if not all(math.isfinite(v) for v in vals):
            raise AccuracyError("non-finite GL coefficient", module="glcoeff")

    def kappa(self, D):
        """``kappa = sqrt(lambda2 D)`` for ``D > 0``."""
        if not D > 0:
            raise DomainError("kappa needs D > 0", module="glcoeff")
        return math.sqrt(self.lambda2 * D)

    def as_tuple(self):
        return self.lambda0, self.lambda1, self.lambda2, self.lambda3


def _l2_norm(grid, a):
    return math.sqrt(4.0 * math.pi * float(np.dot(grid.weights * grid.nodes ** 2, a * a)))


def pair_wavefunction(V, mu, tc, grid_opts=None):
    """Momentum profile ``alpha_hat_0`` at ``T_c`` (s-wave), unit ``L^2(R^3)`` norm.

    Returns ``(grid, alpha_hat, eigenvalue)``; the eigenvalue of the
    Birman-Schwinger matrix should be -1 at the true ``T_c``.
    """
    op = channel_operator(V, 0, ThermoPoint(tc, mu), grid_opts=grid_opts)
    a = op.alpha_profile()
    a = a / _l2_norm(op.grid, a)
    return op.grid, a, op.lowest_eigenvalue


def t_profile(V, alpha0, tc, grid, mu=None, rtol=1e-6):
    """``t(q)`` on the grid nodes by two routes, certified equal.

    Route one is ``2 K_{T_c}(q) alpha_hat_0(q)``.  Route two transforms
    ``alpha_hat_0`` to position space, multiplies by ``-2 V`` and transforms
    back: ``t(q) = -2 (2 pi)^{-3/2} 4 pi int r^2 V alpha_0 j_0(q r) dr``.

    Returns
    -------
    t : ndarray
        Route-one values.
    discrepancy : float
        ``max |t1 - t2| / max |t1|``.

    Raises
    ------
    AccuracyError
        Routes differ by more than ``rtol`` (convention or eigenvector fault).
    """
    if mu is None:
        mu = grid.fermi_momentum ** 2
    if tc <= 0:
        raise InvalidParameterError("T_c must be > 0", module="glcoeff")
    q = grid.nodes
    alpha0 = np.asarray(alpha0, dtype=float)
    t1 = 2.0 * k_T(q, ThermoPoint(tc, mu)) * alpha0
    r, wr = radial_rule(V, float(q[-1]))
    jq = spherical_jn(0, np.multiply.outer(r, q))
    # alpha_0(r) = (2 pi)^{-3/2} 4 pi int q^2 alpha_hat j_0(q r) dq
    a_r = 4.0 * math.pi / _TWO_PI_32 * (jq @ (grid.weights * q * q * alpha0))
    t2 = -2.0 * 4.0 * math.pi / _TWO_PI_32 * ((wr * r * r * V(r) * a_r) @ jq)
    scale = np.max(np.abs(t1))
    disc = float(np.max(np.abs(t1 - t2)) / scale) if scale > 0 else 0.0
    if disc > rtol:
        raise AccuracyError("t-profile routes disagree", module="glcoeff", residual=disc)
    return t1, disc


def compute_coefficients(V, mu, tc, t, grid, norm=1.0, discrepancy=0.0):
    """The four GL coefficients from a ``t`` profile on ``grid``."""
    if not tc > 0:
        raise InvalidParameterError("T_c must be > 0", module="glcoeff")
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidParameterError("t profile must be finite", module="glcoeff")
    q = grid.nodes
    beta = 1.0 / tc
    z = beta * xi_of(q, mu)
    meas = grid.weights * q * q / (2.0 * math.pi ** 2)
    t2 = t * t
    i0 = float(np.dot(meas, t2 * (g1(z) + (2.0 / 3.0) * beta * q * q * g2(z))))
    i1 = float(np.dot(meas, t2 * g1(z)))
    # cosh^{-2}(z/2) = 4 e^{-|z|} / (1 + e^{-|z|})^2
    e = np.exp(-np.abs(z))
    i2 = float(np.dot(meas, t2 * 4.0 * e / (1.0 + e) ** 2))
    i3 = float(np.dot(meas, t2 * t2 * beta * g1_over_z(z)))
    lam0 = i0 / (16.0 * tc * tc)
    if not lam0 > 0:
        raise AccuracyError("lambda0 not positive", module="glcoeff", residual=lam0)
    lam1 = i1 / (4.0 * tc * tc * lam0)
    lam2 = i2 / (8.0 * tc * lam0)
    lam3 = i3 / (16.0 * tc * tc * lam0)
    return GLCoefficients(lam0, lam1, lam2, lam3, tc, mu, t, grid, norm, discrepancy)


def gl_coefficients(V, mu, tc=None, ell=0, grid_opts=None, tc_opts=None, scale=1.0):
    """End to end: ``T_c``, zero mode, ``t`` profile, coefficients.

    ``scale`` multiplies ``alpha_0`` after normalization (covariance checks).
    Only the non-degenerate s-wave case is supported.
    """
    if ell != 0:
        raise DomainError("GL coefficients are defined for the s-wave zero mode only",
                          module="glcoeff")
    gopts = grid_opts or GridOptions()
    if tc is None:
        rep = critical_temperature(V, mu, tc_opts or TcOptions(ell_max=0, grid=gopts))
        if rep.channel != 0:
            raise DomainError("pairing channel is not s-wave", module="glcoeff")
        tc = rep.tc
    if not tc > 0:
        raise DomainError("no superconducting phase (T_c = 0)", module="glcoeff")
    grid, alpha, _ = pair_wavefunction(V, mu, tc, gopts)
    alpha = scale * alpha
    t, disc = t_profile(V, alpha, tc, grid, mu)
    return compute_coefficients(V, mu, tc, t, grid, norm=scale, discrepancy=disc)
