"""Radial two-body potentials, their Fourier transforms and channel kernels.

Conventions
-----------
``Vhat(p) = (2 pi)^{-3/2} int V(x) exp(-i p.x) dx``.  In the angular-momentum
sector ``ell`` the interaction acts on radial momentum functions through

    K_ell(p, q) = (2/pi) int_0^inf r^2 V(r) j_ell(p r) j_ell(q r) dr,

so that ``(V f)(p) = int_0^inf q^2 K_ell(p, q) f(q) dq`` and
``K_ell(k_F, k_F) = (1/2 pi^2) int V(x) |j_ell(k_F |x|)|^2 dx``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import spherical_jn

from .errors import AccuracyError, ConfigError, InvalidParameterError, NumericalError
from .specfun import RadialGrid, gauss_legendre_panels, legendre_p

__all__ = [
    "RadialPotential",
    "ChannelKernel",
    "fourier_transform",
    "channel_kernel_position",
    "channel_kernel_momentum",
    "kernel_values",
    "radial_rule",
    "read_tabulated",
    "FAMILIES",
]

FAMILIES = ("gaussian", "square_well", "exponential", "tabulated")

_TWO_PI_32 = (2.0 * math.pi) ** 1.5
# relative size at which a decaying profile is treated as zero
_NEGLIGIBLE = 1e-18


@dataclass(frozen=True)
class RadialPotential:
    """A radial interaction ``V(r) = coupling * (-strength) * shape(r / range)``.

    ``strength > 0`` is attractive.  For ``family="tabulated"`` the profile is
    given by ``(table_r, table_v)`` and ``strength``/``range`` are unused.
    """

    family: str
    strength: float = 1.0
    range: float = 1.0
    coupling: float = 1.0
    table_r: tuple = field(default=(), repr=False)
    table_v: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"unknown potential family {self.family!r}",
                                        module="potential")
        for name in ("strength", "range", "coupling"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite", module="potential")
        if self.coupling < 0:
            raise InvalidParameterError("coupling must be >= 0", module="potential")
        if self.family == "tabulated":
            r = np.asarray(self.table_r, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if r.ndim != 1 or r.size < 4 or r.size != v.size:
                raise InvalidParameterError("tabulated potential needs >= 4 (r, V) pairs",
                                            module="potential")
            if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
                raise InvalidParameterError("non-finite table entries", module="potential")
            if r[0] < 0 or np.any(np.diff(r) <= 0):
                raise InvalidParameterError("table nodes must be >= 0 and strictly increasing",
                                            module="potential")
            peak = np.max(np.abs(v))
            if peak > 0 and abs(v[-1]) >= 1e-8 * peak:
                raise InvalidParameterError("tabulated V must decay below 1e-8 of its peak "
                                            "at the last node", module="potential")
        elif self.range <= 0:
            raise InvalidParameterError("range must be positive", module="potential")

    # -- constructors ------------------------------------------------------
    @classmethod
    def gaussian(cls, v, s, coupling=1.0):
        """``V(r) = -v exp(-r^2 / (2 s^2))``."""
        return cls("gaussian", float(v), float(s), float(coupling))

    @classmethod
    def square_well(cls, v, R, coupling=1.0):
        """``V(r) = -v`` for ``r < R``, zero outside."""
        return cls("square_well", float(v), float(R), float(coupling))

    @classmethod
    def exponential(cls, v, s, coupling=1.0):
        """``V(r) = -v exp(-r / s)``."""
        return cls("exponential", float(v), float(s), float(coupling))

    @classmethod
    def tabulated(cls, r, values, coupling=1.0):
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.size and r[0] > 0:
            # extend flat to the origin so the interpolant covers [0, r_max]
            r = np.concatenate([[0.0], r])
            values = np.concatenate([[values[0]], values])
        return cls("tabulated", 1.0, 1.0, float(coupling),
                   tuple(r.tolist()), tuple(values.tolist()))

    @classmethod
    def from_file(cls, path, coupling=1.0):
        r, v = read_tabulated(path)
        return cls.tabulated(r, v, coupling)

    @classmethod
    def from_spec(cls, text):
        """Parse ``"family:key=value,..."``, e.g. ``"gaussian:v=5,s=1"``.

        Accepted keys: ``v``, ``s``/``R``/``range``, ``lambda``/``coupling``
        and, for ``tabulated``, ``file``.
        """
        m = re.fullmatch(r"\s*([a-z_]+)\s*(?::(.*))?", text)
        if not m:
            raise ConfigError(f"cannot parse potential spec {text!r}", module="potential")
        family, rest = m.group(1), m.group(2) or ""
        kv = {}
        for item in filter(None, (t.strip() for t in rest.split(","))):
            if "=" not in item:
                raise ConfigError(f"bad potential parameter {item!r}", module="potential")
            k, val = (t.strip() for t in item.split("=", 1))
            kv[k] = val
        coupling = float(kv.pop("lambda", kv.pop("coupling", 1.0)))
        if family == "tabulated":
            if "file" not in kv:
                raise ConfigError("tabulated potential needs file=...", module="potential")
            path = kv.pop("file")
            if kv:
                raise ConfigError(f"unknown keys {sorted(kv)}", module="potential")
            return cls.from_file(path, coupling)
        if family not in FAMILIES:
            raise ConfigError(f"unknown potential family {family!r}", module="potential")
        v = float(kv.pop("v", 1.0))
        rng = kv.pop("s", kv.pop("R", kv.pop("range", 1.0)))
        if kv:
            raise ConfigError(f"unknown keys {sorted(kv)}", module="potential")
        return cls(family, v, float(rng), coupling)

    def with_coupling(self, coupling):
        return replace(self, coupling=float(coupling))

    def scaled(self, c):
        """Multiply the potential by ``c`` (folded into the coupling)."""
        return replace(self, coupling=self.coupling * float(c))

    def spec_string(self):
        if self.family == "tabulated":
            return f"tabulated:n={len(self.table_r)},lambda={self.coupling!r}"
        return (f"{self.family}:v={self.strength!r},s={self.range!r},"
                f"lambda={self.coupling!r}")

    # -- evaluation --------------------------------------------------------
    @property
    def _interp(self):
        # cached lazily on the frozen instance
        try:
            return self.__dict__["_pchip"]
        except KeyError:
            f = PchipInterpolator(np.asarray(self.table_r), np.asarray(self.table_v),
                                  extrapolate=False)
            object.__setattr__(self, "_pchip", f)
            return f

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        c = self.coupling
        if self.family == "gaussian":
            return -c * self.strength * np.exp(-r * r / (2.0 * self.range ** 2))
        if self.family == "square_well":
            return np.where(r < self.range, -c * self.strength, 0.0)
        if self.family == "exponential":
            return -c * self.strength * np.exp(-r / self.range)
        out = self._interp(r)
        return c * np.nan_to_num(out, nan=0.0)

    def support(self):
        """Radius beyond which ``r^2 |V(r)|`` is negligible."""
        if self.family == "gaussian":
            return self.range * math.sqrt(2.0 * math.log(1.0 / _NEGLIGIBLE)) * 1.05
        if self.family == "square_well":
            return self.range
        if self.family == "exponential":
            return self.range * (math.log(1.0 / _NEGLIGIBLE) + 8.0)
        return float(self.table_r[-1])

    def breakpoints(self):
        """Radii where V or its derivatives jump; panels never straddle them."""
        if self.family == "tabulated":
            return np.asarray(self.table_r)
        return np.array([0.0, self.support()])

    def shape_scale(self):
        """Length over which the profile changes appreciably."""
        if self.family == "tabulated":
            return float(np.min(np.diff(self.table_r)))
        return self.range

    def volume_integral(self):
        """``int V(x) dx`` over R^3."""
        c = -self.coupling * self.strength
        if self.family == "gaussian":
            return c * (2.0 * math.pi * self.range ** 2) ** 1.5
        if self.family == "square_well":
            return c * 4.0 * math.pi * self.range ** 3 / 3.0
        if self.family == "exponential":
            return c * 8.0 * math.pi * self.range ** 3
        r, w = radial_rule(self, 1.0)
        return float(4.0 * math.pi * np.dot(w, r * r * self(r)))

    def is_single_signed(self):
        if self.family != "tabulated":
            return True
        v = np.asarray(self.table_v)
        return bool(np.all(v <= 0) or np.all(v >= 0))


def read_tabulated(path):
    """Read two-column ``r V(r)`` text; ``#`` starts a comment."""
    try:
        data = np.loadtxt(Path(path), comments="#", ndmin=2, encoding="utf-8")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read tabulated potential {path}: {exc}",
                          module="potential") from exc
    if data.shape[1] != 2:
        raise ConfigError("tabulated potential file must have two columns",
                          module="potential")
    return data[:, 0], data[:, 1]


def radial_rule(V, kmax, points_per_panel=16):
    """Composite Gauss rule in ``r`` for integrands ``V(r) j(k r) j(k' r)``.

    Panels respect the potential's breakpoints and are narrow enough to hold
    about 1.5 periods of ``cos(2 kmax r)``.
    """
    bps = V.breakpoints()
    h = min(3.0 * math.pi / (2.0 * max(kmax, 1e-12)), 0.5 * V.shape_scale())
    if V.family == "tabulated":
        h = min(3.0 * math.pi / (2.0 * max(kmax, 1e-12)), max(V.support() / 8, 1e-3))
    edges = [bps[0]]
    for a, b in zip(bps[:-1], bps[1:]):
        n = max(1, int(math.ceil((b - a) / h)))
        edges.extend(np.linspace(a, b, n + 1)[1:].tolist())
    return gauss_legendre_panels(np.asarray(edges), points_per_panel)


def fourier_transform(V, p):
    """``Vhat(p) = (2 pi)^{-3/2} 4 pi int r^2 V(r) j_0(p r) dr``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise InvalidParameterError("p must be >= 0", module="potential")
    c = -V.coupling * V.strength
    s = V.range
    if V.family == "gaussian":
        return c * s ** 3 * np.exp(-0.5 * (s * p) ** 2)
    if V.family == "exponential":
        return c * 8.0 * math.pi * s ** 3 / (1.0 + (s * p) ** 2) ** 2 / _TWO_PI_32
    if V.family == "square_well":
        x = np.asarray(p * s, dtype=float)
        small = np.abs(x) < 1e-2
        xs = np.where(small, 1.0, x)
        exact = (np.sin(xs) - xs * np.cos(xs)) / xs ** 3
        x2 = x * x
        series = 1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 ** 3 / 45360.0
        shape = np.where(small, series, exact)
        return c * 4.0 * math.pi * s ** 3 * shape / _TWO_PI_32
    r, w = radial_rule(V, float(np.max(p)) if p.size else 1.0)
    vals = w * r * r * V(r)
    flat = np.atleast_1d(p).ravel()
    out = np.empty(flat.size)
    step = max(1, 2_000_000 // r.size)   # bound the p x r work array
    for i in range(0, flat.size, step):
        pr = np.multiply.outer(flat[i:i + step], r)
        out[i:i + step] = spherical_jn(0, pr) @ vals
    return (4.0 * math.pi / _TWO_PI_32 * out).reshape(p.shape)


@dataclass(frozen=True, eq=False)
class ChannelKernel:
    """Symmetric matrix ``K_ell(p_i, p_j)`` on a radial grid."""

    ell: int
    grid: RadialGrid
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix.setflags(write=False)


def kernel_values(V, ell, p, q, points_per_panel=16):
    """Rectangular block ``K_ell(p_i, q_j)`` by quadrature in ``r``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    kmax = max(float(np.max(p)), float(np.max(q)))
    r, w = radial_rule(V, kmax, points_per_panel)
    wv = (2.0 / math.pi) * w * r * r * V(r)
    jp = spherical_jn(ell, np.multiply.outer(r, p))
    jq = jp if q is p else spherical_jn(ell, np.multiply.outer(r, q))
    return (jp * wv[:, None]).T @ jq


_KERNEL_CACHE = {}
_KERNEL_CACHE_MAX = 32


def channel_kernel_position(V, ell, grid, check=False):
    """Position-space route to the channel kernel on ``grid``.

    With ``check=True`` the diagonal is recomputed on a refined ``r`` rule and
    an :class:`AccuracyError` is raised if it moves by more than ``1e-10``
    relative to the largest entry.
    """
    ell = int(ell)
    if ell < 0:
        raise InvalidParameterError("ell must be >= 0", module="potential")
    cache_key = (V, ell, grid.key) if grid.key else None
    if cache_key is not None and cache_key in _KERNEL_CACHE:
        return _KERNEL_CACHE[cache_key]
    p = grid.nodes
    mat = kernel_values(V, ell, p, p)
    mat = 0.5 * (mat + mat.T)
    if not np.all(np.isfinite(mat)):
        raise NumericalError("non-finite channel kernel", module="potential")
    if check:
        idx = np.linspace(0, p.size - 1, min(p.size, 12)).astype(int)
        fine = kernel_values(V, ell, p[idx], p[idx], points_per_panel=24)
        err = np.max(np.abs(fine - mat[np.ix_(idx, idx)]))
        scale = max(np.max(np.abs(mat)), 1e-300)
        if err > 1e-10 * scale:
            raise AccuracyError("channel kernel quadrature not converged",
                                module="potential", residual=err / scale)
    out = ChannelKernel(ell, grid, mat)
    if cache_key is not None:
        if len(_KERNEL_CACHE) >= _KERNEL_CACHE_MAX:
            _KERNEL_CACHE.pop(next(iter(_KERNEL_CACHE)))
        _KERNEL_CACHE[cache_key] = out
    return out


_FT_TABLES = {}


def _tabulated_transform(V, kmax, deg=24):
    """Piecewise Chebyshev interpolant of ``Vhat`` on ``[0, kmax]``.

    Direct evaluation costs one radial quadrature per momentum, which the
    momentum route would repeat for every ``(p, q, k)`` triple.  ``Vhat`` of a
    compactly supported profile oscillates on the scale ``1/support``, so
    panels of that width with degree-``deg`` interpolation are certified
    against direct evaluation at off-node points.
    """
    key = (V, float(kmax))
    if key in _FT_TABLES:
        return _FT_TABLES[key]
    n = max(1, int(math.ceil(kmax * V.support())))
    edges = np.linspace(0.0, kmax, n + 1)
    h = edges[1] - edges[0]
    t = np.cos(math.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    nodes = edges[:-1, None] + 0.5 * h * (t[None, :] + 1.0)
    vals = fourier_transform(V, nodes.ravel()).reshape(nodes.shape)
    coef = np.polynomial.chebyshev.chebfit(t, vals.T, deg)

    def evaluate(k):
        k = np.asarray(k, dtype=float)
        idx = np.clip(np.floor(k / h).astype(int), 0, n - 1)
        x = 2.0 * (k - edges[idx]) / h - 1.0
        return np.polynomial.chebyshev.chebval(x.ravel(), coef[:, idx.ravel()],
                                               tensor=False).reshape(k.shape)

    probe = edges[:-1] + 0.37 * h
    err = np.max(np.abs(evaluate(probe) - fourier_transform(V, probe)))
    if err > 1e-12 * max(np.max(np.abs(vals)), 1e-300):
        raise AccuracyError("Fourier-transform interpolant not converged",
                            module="potential", residual=float(err))
    if len(_FT_TABLES) >= _KERNEL_CACHE_MAX:
        _FT_TABLES.pop(next(iter(_FT_TABLES)))
    _FT_TABLES[key] = evaluate
    return evaluate


def _vhat_cutoff(V):
    """Momentum beyond which Vhat is negligible (inf if it decays slowly)."""
    if V.family == "gaussian":
        return math.sqrt(2.0 * math.log(1.0 / _NEGLIGIBLE)) / V.range
    return math.inf


def _momentum_pair(V, ell, p, q, n_panels, n_pts, ft=None):
    """``(2 pi)^{-1/2} int_{-1}^{1} Vhat(|p - q u|) P_ell(u) du`` for one row."""
    out = np.zeros(q.size)
    small = p * q < 1e-10
    if np.any(small):
        # Vhat(|p-q|) is constant in u to leading order
        if ell == 0:
            out[small] = 2.0 * fourier_transform(V, np.abs(p - q[small])) / math.sqrt(2 * math.pi)
    qq = q[~small]
    if qq.size:
        a = np.abs(p - qq)
        b = np.minimum(p + qq, _vhat_cutoff(V))
        b = np.maximum(a, b)
        t, wt = gauss_legendre_panels(np.linspace(0.0, 1.0, n_panels + 1), n_pts)
        k = a[:, None] + (b - a)[:, None] * t[None, :]
        wk = (b - a)[:, None] * wt[None, :]
        u = (p * p + qq[:, None] ** 2 - k * k) / (2.0 * p * qq[:, None])
        u = np.clip(u, -1.0, 1.0)
        vhat = fourier_transform(V, k) if ft is None else ft(k)
        vals = vhat * legendre_p(ell, u) * k
        out[~small] = np.sum(wk * vals, axis=1) / (p * qq) / math.sqrt(2 * math.pi)
    return out


def channel_kernel_momentum(V, ell, grid, panel_width=None, points_per_panel=16):
    """Momentum-space route: Legendre projection of ``Vhat(p - q)``.

    The angular integral is done in the variable ``k = |p - q|``, which keeps
    the integrand smooth when ``Vhat`` is sharply peaked.
    """
    ell = int(ell)
    p = grid.nodes
    if panel_width is None:
        panel_width = 0.25 * V.range if V.family != "tabulated" else 1.0 / V.support()
    span = min(2.0 * float(p[-1]), _vhat_cutoff(V))
    n_panels = max(4, int(math.ceil(span / panel_width)))
    ft = _tabulated_transform(V, 2.0 * float(p[-1])) if V.family == "tabulated" else None
    mat = np.empty((p.size, p.size))
    for i, pi in enumerate(p):
        mat[i] = _momentum_pair(V, ell, pi, p, n_panels, points_per_panel, ft)
    mat = 0.5 * (mat + mat.T)
    if not np.all(np.isfinite(mat)):
        raise NumericalError("non-finite channel kernel", module="potential")
    return ChannelKernel(ell, grid, mat)
