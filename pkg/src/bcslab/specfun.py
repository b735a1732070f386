"""Special functions and radial quadrature shared by the numerical modules.

The radial grids are composite Gauss--Legendre rules whose panels accumulate
geometrically at the Fermi momentum ``sqrt(mu)``, where ``1/K_T`` has a
feature of width ``~T`` in ``p**2 - mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, InvalidParameterError

__all__ = [
    "RadialGrid",
    "GridOptions",
    "build_fermi_adapted_grid",
    "build_uniform_grid",
    "gauss_legendre_panels",
    "spherical_bessel_j",
    "spherical_bessel_j_series",
    "spherical_bessel_j_recurrence",
    "legendre_p",
    "bessel_sum_rule",
    "DEFAULT_LMAX",
]

DEFAULT_LMAX = 40


@lru_cache(maxsize=64)
def _leggauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_panels(edges, n):
    """Composite Gauss--Legendre nodes and weights on consecutive panels.

    Parameters
    ----------
    edges : array_like
        Strictly increasing panel breakpoints.
    n : int
        Points per panel.

    Returns
    -------
    nodes, weights : ndarray
    """
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(int(n))
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + half * (x[None, :] + 1.0)).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature rule for radial momentum integrals on ``[0, cutoff]``.

    Attributes
    ----------
    nodes : ndarray
        Momenta ``p_i``, strictly increasing in ``(0, cutoff]``.
    weights : ndarray
        Positive quadrature weights ``w_i``.
    fermi_momentum : float
        ``sqrt(mu)`` (0 when ``mu <= 0``).
    cutoff : float
        Largest momentum ``Lambda``.
    panel_edges : ndarray
        Sorted breakpoints; contains ``fermi_momentum`` when ``mu > 0``.
    key : tuple
        Construction parameters; used as a cache key by kernel builders.
    """

    nodes: np.ndarray
    weights: np.ndarray
    fermi_momentum: float
    cutoff: float
    panel_edges: np.ndarray
    key: tuple = field(default=())

    def __post_init__(self):
        for arr in (self.nodes, self.weights, self.panel_edges):
            arr.setflags(write=False)

    def __len__(self):
        return self.nodes.size

    @property
    def size(self):
        return self.nodes.size

    def integrate(self, values):
        """``sum_i w_i f(p_i)`` for samples ``values`` on the nodes."""
        return float(np.dot(self.weights, values))

    def min_panel_width(self):
        return float(np.min(np.diff(self.panel_edges)))

    def panel_width_at(self, p):
        """Width of the panel containing ``p``."""
        i = np.searchsorted(self.panel_edges, p, side="right") - 1
        i = min(max(i, 0), self.panel_edges.size - 2)
        return float(self.panel_edges[i + 1] - self.panel_edges[i])


def _check_finite(**kwargs):
    for name, value in kwargs.items():
        if not np.isfinite(value):
            raise InvalidParameterError(f"{name} must be finite, got {value!r}",
                                        module="specfun")


def _outer_edges(start, width, cutoff, ratio, max_width):
    """Panels from ``start`` to ``cutoff`` with widths growing by ``ratio``."""
    edges = [start]
    x = start
    while x < cutoff:
        width = min(width * ratio, max_width)
        if x + 1.5 * width >= cutoff:
            x = cutoff
        else:
            x = x + width
        edges.append(x)
    return edges


def build_fermi_adapted_grid(mu, cutoff, scale, panels_per_decade=3,
                             points_per_panel=12, max_panel_width=1.0,
                             allow_nonpositive_mu=False):
    """Composite Gauss--Legendre grid refined geometrically at ``p = sqrt(mu)``.

    Panels on either side of the Fermi momentum ``k_F`` have widths shrinking
    by ``10**(1/panels_per_decade)`` down to ``scale / (2 k_F)``, i.e. an
    energy window of ``scale`` in ``p**2 - mu``. Beyond ``2 k_F`` widths grow
    again, capped at ``max_panel_width``.

    Parameters
    ----------
    mu : float
        Chemical potential.
    cutoff : float
        Momentum cutoff ``Lambda``; ``cutoff**2 > max(mu, 0)``.
    scale : float
        Energy resolution, typically ``max(T, |Delta|)``.
    panels_per_decade, points_per_panel : int
    max_panel_width : float
    allow_nonpositive_mu : bool
        Accept ``mu <= 0``; no Fermi panel is inserted then.

    Returns
    -------
    RadialGrid
    """
    _check_finite(mu=mu, cutoff=cutoff, scale=scale)
    if scale <= 0:
        raise InvalidParameterError("scale must be positive", module="specfun")
    if panels_per_decade < 1 or points_per_panel < 2:
        raise InvalidParameterError("need >=1 panel per decade and >=2 points",
                                    module="specfun")
    if mu <= 0 and not allow_nonpositive_mu:
        raise InvalidParameterError("mu must be positive (pass allow_nonpositive_mu)",
                                    module="specfun")
    if cutoff <= 0 or cutoff ** 2 <= max(mu, 0.0):
        raise DomainError("cutoff**2 must exceed max(mu, 0)", module="specfun")

    ratio = 10.0 ** (1.0 / panels_per_decade)
    key = ("fermi", float(mu), float(cutoff), float(scale), int(panels_per_decade),
           int(points_per_panel), float(max_panel_width))

    if mu <= 0:
        first = min(max_panel_width, cutoff / 4.0)
        edges = np.asarray(_outer_edges(0.0, first / ratio, cutoff, ratio,
                                        max_panel_width))
        nodes, weights = gauss_legendre_panels(edges, points_per_panel)
        return RadialGrid(nodes, weights, 0.0, float(cutoff), edges, key)

    kf = math.sqrt(mu)
    # a resolution coarser than k_F itself needs no refinement
    d_min = min(scale / (2.0 * kf), 0.5 * kf)
    if kf + d_min >= cutoff:
        raise DomainError("cutoff too close to the Fermi momentum", module="specfun")
    # distances from k_F on the inner (below) side
    below = []
    d = d_min
    while d < kf / ratio ** 0.5:
        below.append(d)
        d *= ratio
    lower = [0.0] + [kf - d for d in reversed(below)] + [kf]
    upper_span = min(kf, cutoff - kf)
    above = []
    d = d_min
    while d < upper_span / ratio ** 0.5:
        above.append(d)
        d *= ratio
    upper = [kf + d for d in above]
    if kf + upper_span < cutoff:
        upper.append(kf + upper_span)
        last_width = upper[-1] - (upper[-2] if len(upper) > 1 else kf)
        upper += _outer_edges(upper[-1], last_width, cutoff, ratio,
                              max(max_panel_width, last_width))[1:]
    else:
        upper.append(cutoff)
    edges = np.asarray(lower + upper, dtype=float)
    if np.any(np.diff(edges) <= 0):
        raise DomainError("degenerate panel layout; increase cutoff or scale",
                          module="specfun")
    nodes, weights = gauss_legendre_panels(edges, points_per_panel)
    return RadialGrid(nodes, weights, kf, float(cutoff), edges, key)


def build_uniform_grid(lo, hi, panels, points_per_panel=16):
    """Plain composite Gauss--Legendre grid on ``[lo, hi]``."""
    edges = np.linspace(lo, hi, panels + 1)
    nodes, weights = gauss_legendre_panels(edges, points_per_panel)
    return RadialGrid(nodes, weights, 0.0, float(hi), edges,
                      ("uniform", lo, hi, panels, points_per_panel))


# --------------------------------------------------------------------------
# spherical Bessel functions

def _series_ok(ell, x):
    return x * x <= 0.5 * (ell + 1.5)


def spherical_bessel_j_series(ell, x, terms=40):
    """Power series of ``j_ell(x)``; accurate for ``x**2 <~ ell + 1``."""
    x = np.asarray(x, dtype=float)
    lead = np.ones_like(x)
    dfact = 1.0
    for k in range(1, ell + 1):
        dfact *= 2 * k + 1
    if ell > 0:
        lead = x ** ell / dfact
    else:
        lead = lead / dfact
    y = -0.5 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, terms):
        term = term * y / (k * (2 * ell + 2 * k + 1))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return lead * total


def spherical_bessel_j_recurrence(ell, x):
    """``j_ell(x)`` by Miller's downward recurrence, normalized on ``j_0, j_1``.

    Requires ``x > 0``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise InvalidParameterError("recurrence branch needs x > 0", module="specfun")
    xmax = float(np.max(x))
    start = int(max(ell, xmax) + 30 + 15 * xmax ** (1.0 / 3.0))
    f_next = np.zeros_like(x)
    f = np.full_like(x, 1e-300)
    f_ell = np.zeros_like(x) if ell > 1 else None
    f1 = None
    for n in range(start, 0, -1):
        f_prev = (2 * n + 1) / x * f - f_next
        f_next, f = f, f_prev
        # now f holds f_{n-1}, f_next holds f_n
        if n - 1 == ell and f_ell is not None:
            f_ell = f.copy()
        if n - 1 == 1:
            f1 = f.copy()
        big = np.abs(f) > 1e250
        if np.any(big):
            s = np.where(big, 1e-250, 1.0)
            f = f * s
            f_next = f_next * s
            if f_ell is not None and n - 1 <= ell:
                f_ell = f_ell * s
            if f1 is not None and n - 1 <= 1:
                f1 = f1 * s
    f0 = f
    if f1 is None:
        f1 = f_next
    m = np.maximum(np.abs(f0), np.abs(f1))
    f0 = f0 / m
    f1 = f1 / m
    if f_ell is not None:
        f_ell = f_ell / m
    s, c = np.sin(x), np.cos(x)
    j0 = s / x
    j1 = s / (x * x) - c / x
    norm = (j0 * f0 + j1 * f1) / (f0 * f0 + f1 * f1)
    if ell == 0:
        return norm * f0
    if ell == 1:
        return norm * f1
    return norm * f_ell


def spherical_bessel_j(ell, x):
    """Spherical Bessel function ``j_ell(x)`` for ``x >= 0``.

    Small arguments use the power series, everything else Miller's downward
    recurrence. Scalar input gives a float.
    """
    if int(ell) != ell or ell < 0:
        raise InvalidParameterError("ell must be a non-negative integer", module="specfun")
    ell = int(ell)
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xa < 0) or not np.all(np.isfinite(xa)):
        raise InvalidParameterError("x must be finite and >= 0", module="specfun")
    out = np.empty_like(xa)
    small = _series_ok(ell, xa)
    if np.any(small):
        out[small] = spherical_bessel_j_series(ell, xa[small])
    if np.any(~small):
        out[~small] = spherical_bessel_j_recurrence(ell, xa[~small])
    return float(out[0]) if scalar else out


def bessel_sum_rule(x, lmax=DEFAULT_LMAX):
    """``sum_{l<=lmax} (2l+1) j_l(x)**2``; tends to 1 as ``lmax`` grows."""
    return sum((2 * l + 1) * spherical_bessel_j(l, x) ** 2 for l in range(lmax + 1))


def legendre_p(ell, u):
    """Legendre polynomial ``P_ell(u)`` by the three-term recurrence."""
    if int(ell) != ell or ell < 0:
        raise InvalidParameterError("ell must be a non-negative integer", module="specfun")
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1 + 1e-14):
        raise InvalidParameterError("|u| must be <= 1", module="specfun")
    p_prev = np.ones_like(u)
    if ell == 0:
        return p_prev if u.ndim else float(p_prev)
    p = u.copy()
    for n in range(1, int(ell)):
        p_prev, p = p, ((2 * n + 1) * u * p - n * p_prev) / (n + 1)
    return p if u.ndim else float(p)


@dataclass(frozen=True)
class GridOptions:
    """Controls for Fermi-adapted momentum grids.

    ``cutoff=None`` means ``20 * max(sqrt(mu), 1)``.
    """

    cutoff: float | None = None
    panels_per_decade: int = 3
    points_per_panel: int = 12
    max_panel_width: float = 1.0

    def cutoff_for(self, mu):
        if self.cutoff is not None:
            return float(self.cutoff)
        return 20.0 * max(math.sqrt(max(mu, 0.0)), 1.0)

    def build(self, mu, scale):
        return build_fermi_adapted_grid(
            mu, self.cutoff_for(mu), scale, self.panels_per_decade,
            self.points_per_panel, self.max_panel_width, allow_nonpositive_mu=True)
