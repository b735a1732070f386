"""Scattering length from the Birman-Schwinger resolvent, with an ODE oracle.

For a radial ``V`` write ``V^{1/2} = sgn(V) |V|^{1/2}``.  The scattering length
is

    a = (1/4 pi) < |V|^{1/2}, (1 + V^{1/2} (-Lap)^{-1} |V|^{1/2})^{-1} V^{1/2} >,

which in the s-wave sector becomes ``a = int_0^inf r^2 |V|^{1/2} phi dr`` with

    phi(r) + V^{1/2}(r) int_0^inf r'^2 |V|^{1/2}(r') phi(r') / max(r, r') dr' = V^{1/2}(r).

This is the zero-energy scattering length of ``-Lap + V``, i.e. the intercept
``a = r - u/u'`` of the solution of ``u'' = V u`` outside the potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import AccuracyError, DomainError, NumericalError
from .specfun import _leggauss

__all__ = ["ScatteringReport", "scattering_length", "scattering_length_ode", "radial_panels"]


@dataclass(frozen=True)
class ScatteringReport:
    a: float
    bs_spectrum_floor: float
    method: str
    bound_state_free: bool


def radial_panels(V, max_width=None):
    """Panel edges on ``[0, support]`` respecting the potential's breakpoints."""
    bps = V.breakpoints()
    h = max_width if max_width is not None else V.shape_scale()
    if V.family == "tabulated":
        h = max_width if max_width is not None else max(V.support() / 64, 1e-3)
    edges = [bps[0]]
    for a, b in zip(bps[:-1], bps[1:]):
        n = max(1, int(math.ceil((b - a) / h)))
        edges.extend(np.linspace(a, b, n + 1)[1:].tolist())
    return np.asarray(edges)


def _lagrange_matrix(nodes, x):
    """``L[k, j] = l_j(x_k)`` for the Lagrange basis on ``nodes``."""
    n = nodes.size
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / np.prod(diff, axis=1)
    d = x[:, None] - nodes[None, :]
    exact = np.isclose(d, 0.0, atol=1e-300, rtol=0)
    d = np.where(exact, 1.0, d)
    t = bw[None, :] / d
    L = t / t.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    if np.any(rows):
        L[rows] = exact[rows].astype(float)
    return L


def _green_weights(edges, npts):
    """Nodes, weights and the product-integration matrix of ``1/max(r, r')``.

    ``G[i, j] f_j`` integrates ``r'^2 f(r') / max(r_i, r')`` exactly for ``f``
    polynomial of degree < ``npts`` on each panel.
    """
    x, w = _leggauss(npts)
    r_list, w_list, panel = [], [], []
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        r_list.append(0.5 * (b - a) * x + 0.5 * (b + a))
        w_list.append(0.5 * (b - a) * w)
        panel.append(np.full(npts, k))
    r = np.concatenate(r_list)
    wr = np.concatenate(w_list)
    panel = np.concatenate(panel)
    n = r.size
    G = np.empty((n, n))
    # away from r_i the integrand is a polynomial of degree npts + 1: plain Gauss
    G[:] = wr[None, :] * (r[None, :] ** 2) / np.maximum(r[:, None], r[None, :])
    for i in range(n):
        k = panel[i]
        a, b = edges[k], edges[k + 1]
        nodes = r_list[k]
        sl = slice(k * npts, (k + 1) * npts)
        row = np.zeros(npts)
        for lo, hi, inner in ((a, r[i], True), (r[i], b, False)):
            t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            wt = 0.5 * (hi - lo) * w
            g = t * t / r[i] if inner else t
            row += (wt * g) @ _lagrange_matrix(nodes, t)
        G[i, sl] = row
    return r, wr, G


def _sqrt_parts(V, r):
    v = V(r)
    s = np.sqrt(np.abs(v))
    return np.sign(v) * s, s


def scattering_length(V, method="resolvent", points_per_panel=16, max_width=None):
    """Scattering length of ``-Lap + V`` via the Birman-Schwinger resolvent.

    Parameters
    ----------
    V : RadialPotential
    method : {"resolvent", "ode_oracle"}
    points_per_panel : int
    max_width : float, optional
        Panel width in ``r``; default the potential's range.

    Raises
    ------
    DomainError
        The s-wave spectrum floor is ``<= -1`` (bound state or resonance: the
        scattering length is infinite or not defined by the resolvent).
    NumericalError
        Ill-conditioned linear solve.
    """
    edges = radial_panels(V, max_width)
    r, wr, G = _green_weights(edges, points_per_panel)
    vh, va = _sqrt_parts(V, r)
    if not np.any(va):
        floor = 0.0
    else:
        B = vh[:, None] * G * va[None, :]
        ev = sla.eigvals(B, check_finite=False)
        floor = float(np.min(ev.real))
    free = floor > -1.0
    if method == "ode_oracle":
        return ScatteringReport(scattering_length_ode(V), floor, "ode_oracle", free)
    if method != "resolvent":
        raise ValueError(f"unknown method {method!r}")
    if not free:
        raise DomainError(f"s-wave Birman-Schwinger floor {floor:.6g} <= -1: bound state "
                          "or resonance, scattering length not finite", module="scatter",
                          residual=floor)
    if not np.any(va):
        return ScatteringReport(0.0, floor, "resolvent", True)
    M = np.eye(r.size) + vh[:, None] * G * va[None, :]
    try:
        lu = sla.lu_factor(M, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"resolvent solve failed: {exc}", module="scatter") from exc
    cond = np.linalg.cond(M)
    if not math.isfinite(cond) or cond > 1e12:
        raise NumericalError("resolvent system ill-conditioned", module="scatter",
                             residual=cond)
    phi = sla.lu_solve(lu, vh, check_finite=False)
    a = float(np.dot(wr * r * r * va, phi))
    return ScatteringReport(a, floor, "resolvent", True)


def scattering_length_ode(V, rtol=1e-12, atol=1e-14):
    """Intercept ``a = R - u(R)/u'(R)`` of ``u'' = V u``, ``u(0)=0``, ``u'(0)=1``."""
    bps = list(V.breakpoints())
    if V.family == "tabulated":
        bps = [bps[0], bps[-1]]
    y = np.array([0.0, 1.0])
    for a, b in zip(bps[:-1], bps[1:]):
        if b <= a:
            continue

        def rhs(t, u, a=a, b=b):
            # evaluate inside the open interval so a jump at an edge is not sampled
            tt = min(max(t, a + 1e-15 * (b - a)), b - 1e-15 * (b - a))
            return [u[1], float(V(tt)) * u[0]]

        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise AccuracyError(f"ODE integration failed: {sol.message}", module="scatter")
        y = sol.y[:, -1]
    R = bps[-1]
    if y[1] == 0:
        raise DomainError("zero-energy resonance: scattering length infinite",
                          module="scatter")
    return float(R - y[0] / y[1])
