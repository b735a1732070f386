"""Scalar BCS dispersion functions and the renormalization integral m_mu(T)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import AccuracyError, DomainError, InvalidParameterError
from .specfun import build_fermi_adapted_grid

__all__ = [
    "ThermoPoint",
    "EULER_GAMMA",
    "M_MU_CONSTANT",
    "xi",
    "k_T",
    "e_delta",
    "k_T_delta",
    "subtracted_integral",
    "m_mu",
    "m_mu_lowdensity",
    "g1",
    "g2",
    "g1_over_z",
]

EULER_GAMMA = 0.57721566490153286061
# T -> 0 constant of m_mu(T) - sqrt(mu) ln(mu/T)
M_MU_CONSTANT = EULER_GAMMA - 2.0 + math.log(8.0 / math.pi)

_SERIES_X = 1e-6
_SERIES_Z = 1e-3


@dataclass(frozen=True)
class ThermoPoint:
    """Temperature ``T >= 0`` and chemical potential ``mu`` (``k_B = 1``)."""

    T: float
    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.T) and math.isfinite(self.mu)):
            raise InvalidParameterError("T and mu must be finite", module="dispersion")
        if self.T < 0:
            raise InvalidParameterError("T must be >= 0", module="dispersion")

    @property
    def beta(self):
        return math.inf if self.T == 0 else 1.0 / self.T

    @property
    def fermi_momentum(self):
        return math.sqrt(self.mu) if self.mu > 0 else 0.0


def _x_coth(x, T):
    """``x / tanh(x / 2T)``, even in ``x``; ``|x|`` at ``T = 0``."""
    x = np.abs(np.asarray(x, dtype=float))
    if T == 0:
        return x
    z = x / (2.0 * T)
    small = z < _SERIES_X
    zs = np.where(small, 1.0, z)
    z2 = z * z
    series = 2.0 * T * (1.0 + z2 / 3.0 - z2 * z2 / 45.0 + 2.0 * z2 ** 3 / 945.0)
    return np.where(small, series, x / np.tanh(zs))


def xi(p, mu):
    """``p^2 - mu``; for ``mu > 0`` as ``(p - k_F)(p + k_F)``, smooth at the Fermi point."""
    p = np.asarray(p, dtype=float)
    if mu > 0:
        kf = math.sqrt(mu)
        return (p - kf) * (p + kf)
    return p * p - mu


def k_T(p, pt):
    """``K_T(p) = (p^2 - mu) / tanh((p^2 - mu) / 2T)``."""
    p = np.asarray(p, dtype=float)
    return _x_coth(xi(p, pt.mu), pt.T)


def e_delta(p, delta, pt):
    """``E_Delta(p) = sqrt((p^2 - mu)^2 + |Delta|^2)``."""
    p = np.asarray(p, dtype=float)
    return np.hypot(xi(p, pt.mu), np.abs(delta))


def k_T_delta(p, delta, pt):
    """``K_T^Delta(p) = E / tanh(E / 2T)``; equals ``E`` at ``T = 0``."""
    return _x_coth(e_delta(p, delta, pt), pt.T)


def _subtracted_integrand(p, mu, T, delta):
    """``p^2 tanh(E/2T)/E - 1`` written without cancellation at large ``p``."""
    p2 = p * p
    E = np.hypot(xi(p, mu), delta)
    # p^2 - E = (2 mu p^2 - mu^2 - delta^2) / (p^2 + E)
    base = (2.0 * mu * p2 - mu * mu - delta * delta) / (p2 + E)
    if T == 0:
        thermal = 0.0
    else:
        thermal = -2.0 * p2 * expit(-E / T)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (thermal + base) / E
    if T > 0:
        near = E < 2.0 * T * _SERIES_X
        if np.any(near):
            out = np.where(near, p2 / _x_coth(E, T) - 1.0, out)
    return out


def subtracted_integral(mu, T, delta=0.0, cutoff=None, points_per_panel=12,
                        panels_per_decade=3, check=True, rtol=1e-9):
    """``int_0^inf (p^2 tanh(E/2T)/E - 1) dp`` for constant gap ``delta``.

    With ``delta = 0`` this is ``m_mu(T)``.  The range beyond the cutoff is
    added analytically: there ``tanh = 1`` and the integrand is
    ``mu/(p^2 - mu)`` up to ``O(delta^2 / p^4)``.
    """
    if not (mu > 0):
        raise DomainError("mu must be > 0", module="dispersion")
    if T < 0 or delta < 0:
        raise InvalidParameterError("T and delta must be >= 0", module="dispersion")
    scale = max(T, delta)
    if scale <= 0:
        raise DomainError("integral diverges at T = 0 with zero gap", module="dispersion")
    kf = math.sqrt(mu)
    if cutoff is None:
        cutoff = max(40.0 * kf, math.sqrt(mu + 80.0 * T), 40.0 * math.sqrt(delta))

    def run(ppp):
        g = build_fermi_adapted_grid(mu, cutoff, scale, panels_per_decade=panels_per_decade,
                                     points_per_panel=ppp)
        body = g.integrate(_subtracted_integrand(g.nodes, mu, T, delta))
        tail = 0.5 * kf * math.log((cutoff + kf) / (cutoff - kf))
        return body + tail

    val = run(points_per_panel)
    if check:
        ref = run(points_per_panel + 6)
        err = abs(ref - val)
        if err > rtol * max(abs(ref), kf):
            raise AccuracyError("subtracted integral quadrature not converged",
                                module="dispersion", residual=err)
        val = ref
    return float(val)


def m_mu(pt, **kw):
    """``m_mu(T) = int_0^inf (p^2 / K_T(p) - 1) dp``.

    Behaves as ``sqrt(mu) (ln(mu/T) + M_MU_CONSTANT)`` for ``T -> 0``.
    """
    if pt.T <= 0:
        raise DomainError("m_mu requires T > 0", module="dispersion")
    return subtracted_integral(pt.mu, pt.T, 0.0, **kw)


def m_mu_lowdensity(pt, **kw):
    """``m_mu`` in the normalization of the low-density analysis (divided by 2 pi^2)."""
    return m_mu(pt, **kw) / (2.0 * math.pi ** 2)


def _even_series(z, coeffs):
    z2 = z * z
    out = np.zeros_like(z)
    for c in reversed(coeffs):
        out = out * z2 + c
    return out


_G1Z = (1.0 / 12, -1.0 / 60, 17.0 / 6720, -31.0 / 90720)
_G2 = (0.25, -1.0 / 12, 17.0 / 960, -31.0 / 10080)


def _sech2_half(a):
    """``sech^2(a/2)`` for ``a >= 0`` without overflow."""
    e = np.exp(-a)
    return 4.0 * e / (1.0 + e) ** 2


def _sinh_minus_x(a):
    """``sinh(a) - a`` for ``0 <= a <= 1`` by its Taylor series."""
    a2 = a * a
    term = a * a2 / 6.0
    out = term.copy()
    for k in range(2, 12):
        term = term * a2 / ((2 * k) * (2 * k + 1))
        out = out + term
    return out


def g1_over_z(z):
    """``g1(z)/z``; even, positive, ``1/12`` at ``z = 0``.

    Uses ``g1(z)/z = (sinh z - z) / (2 z^3 cosh^2(z/2))``.
    """
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    small = a < _SERIES_Z
    mid = (a >= _SERIES_Z) & (a < 1.0)
    az = np.where(small, 1.0, a)
    s2 = _sech2_half(az)
    am = np.where(mid, az, 0.5)
    v_mid = _sinh_minus_x(am) * _sech2_half(am) / (2.0 * am ** 3)
    v_big = (np.tanh(0.5 * az) - 0.5 * az * s2) / az ** 3
    val = np.where(mid, v_mid, v_big)
    return np.where(small, _even_series(z, _G1Z), val)


def g1(z):
    """``g1(z) = (e^{2z} - 2 z e^z - 1) / (z^2 (1 + e^z)^2)``; odd in ``z``."""
    z = np.asarray(z, dtype=float)
    return z * g1_over_z(z)


def g2(z):
    """``g2(z) = 2 e^z (e^z - 1) / (z (e^z + 1)^3)``; even, ``1/4`` at ``z = 0``.

    Uses ``g2(z) = tanh(z/2) sech^2(z/2) / (2 z)``.
    """
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    small = a < _SERIES_Z
    az = np.where(small, 1.0, a)
    val = np.tanh(0.5 * az) * _sech2_half(az) / (2.0 * az)
    return np.where(small, _even_series(z, _G2), val)
