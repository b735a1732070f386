"""Ginzburg-Landau functional on the periodic unit cell ``[0, 1]^d``.

    E(psi) = int |(-i grad + 2A) psi|^2 + lambda1 W |psi|^2 - lambda2 D |psi|^2 + lambda3 |psi|^4

``psi`` is a trigonometric polynomial ``sum_n psi_n exp(2 pi i n.x)`` with
``|n_i| <= N``; ``W`` and ``A`` are real trigonometric polynomials of radius
``Nf``.  All integrals are evaluated by collocation on an ``M^d`` grid with
``M >= max(4N + 1, 2N + 2Nf + 1)``, which is exact for every term, so energy
and gradient are those of the truncated functional to rounding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.fft import fftn, ifftn, next_fast_len
from scipy.optimize import NoConvergence, minimize, newton_krylov
from scipy.signal import convolve
from scipy.sparse.linalg import LinearOperator, lobpcg

from .errors import AccuracyError, ConfigError, ConvergenceError, InvalidParameterError

__all__ = [
    "PeriodicField",
    "ExternalFields",
    "GLMinOptions",
    "GLMinimum",
    "PhaseCall",
    "gl_energy",
    "gl_energy_and_gradient",
    "minimize_gl",
    "critical_D",
    "hessian_along_critical_mode",
    "superconducting_phase_boundary",
    "read_fields",
    "parse_fields",
]

_HERM_TOL = 1e-12


def _mode_axis(N):
    return np.arange(-N, N + 1)


def _mode_list(dim, N):
    """Integer modes, shape ``(n_modes, dim)``, in C order of the coefficient array."""
    ax = _mode_axis(N)
    grids = np.meshgrid(*([ax] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _hermitian_defect(modes):
    flipped = np.conj(modes[(slice(None, None, -1),) * modes.ndim])
    scale = max(1.0, float(np.max(np.abs(modes))) if modes.size else 1.0)
    return float(np.max(np.abs(modes - flipped))) / scale if modes.size else 0.0


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Order parameter by its Fourier coefficients on ``|n_i| <= N``."""

    dim: int
    N: int
    modes: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise InvalidParameterError("dimension must be 1, 2 or 3", module="glfield")
        m = np.asarray(self.modes, dtype=complex)
        if m.shape != (2 * self.N + 1,) * self.dim:
            raise InvalidParameterError(f"modes shape {m.shape} does not match N={self.N}",
                                        module="glfield")
        if not np.all(np.isfinite(m)):
            raise InvalidParameterError("non-finite Fourier coefficients", module="glfield")
        object.__setattr__(self, "modes", m)

    @classmethod
    def zeros(cls, dim, N):
        return cls(dim, N, np.zeros((2 * N + 1,) * dim, dtype=complex))

    @classmethod
    def constant(cls, dim, N, c):
        m = np.zeros((2 * N + 1,) * dim, dtype=complex)
        m[(N,) * dim] = c
        return cls(dim, N, m)

    def norm_sq(self):
        """``int |psi|^2`` (Parseval)."""
        return float(np.sum(np.abs(self.modes) ** 2))

    def real_space(self, M=None):
        """Values on the grid ``x_j = j / M``."""
        sp = _Spectral(self.dim, self.N, 0, M)
        return sp.to_real(self.modes)

    def with_phase(self, theta):
        return PeriodicField(self.dim, self.N, self.modes * np.exp(1j * theta))

    def scaled(self, c):
        return PeriodicField(self.dim, self.N, self.modes * c)


@dataclass(frozen=True, eq=False)
class ExternalFields:
    """Real periodic ``W`` and ``A`` by Fourier coefficients on ``|n_i| <= Nf``.

    ``W_modes`` has shape ``(2Nf+1,)*dim``; ``A_modes`` has shape
    ``(dim,) + (2Nf+1,)*dim``.
    """

    dim: int
    Nf: int
    W_modes: np.ndarray
    A_modes: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise InvalidParameterError("dimension must be 1, 2 or 3", module="glfield")
        shape = (2 * self.Nf + 1,) * self.dim
        w = np.asarray(self.W_modes, dtype=complex)
        a = np.asarray(self.A_modes, dtype=complex)
        if w.shape != shape or a.shape != (self.dim,) + shape:
            raise InvalidParameterError("field coefficient shapes inconsistent with Nf",
                                        module="glfield")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(a))):
            raise InvalidParameterError("non-finite field coefficients", module="glfield")
        if _hermitian_defect(w) > _HERM_TOL:
            raise InvalidParameterError("W is not real valued (coefficients not Hermitian)",
                                        module="glfield", residual=_hermitian_defect(w))
        for k in range(self.dim):
            if _hermitian_defect(a[k]) > _HERM_TOL:
                raise InvalidParameterError(f"A component {k} is not real valued",
                                            module="glfield")
        object.__setattr__(self, "W_modes", w)
        object.__setattr__(self, "A_modes", a)

    @classmethod
    def zero(cls, dim):
        return cls(dim, 0, np.zeros((1,) * dim), np.zeros((dim,) + (1,) * dim))

    @classmethod
    def constant(cls, dim, w=0.0, a=None):
        """Constant ``W = w`` and constant vector potential ``a``."""
        A = np.zeros((dim,) + (1,) * dim, dtype=complex)
        if a is not None:
            a = np.asarray(a, dtype=float).reshape(dim)
            A[(slice(None),) + (0,) * dim] = a
        return cls(dim, 0, np.full((1,) * dim, w, dtype=complex), A)

    @classmethod
    def cosine_W(cls, dim, w, axis=0, shift=0.0):
        """``W(x) = w cos(2 pi (x_axis - shift))``."""
        W = np.zeros((3,) * dim, dtype=complex)
        idx_p = [1] * dim
        idx_m = [1] * dim
        idx_p[axis] = 2
        idx_m[axis] = 0
        ph = np.exp(-2j * math.pi * shift)
        W[tuple(idx_p)] = 0.5 * w * ph
        W[tuple(idx_m)] = 0.5 * w * np.conj(ph)
        return cls(dim, 1, W, np.zeros((dim,) + (3,) * dim, dtype=complex))

    def scaled_W(self, c):
        return ExternalFields(self.dim, self.Nf, self.W_modes * c, self.A_modes)

    def translated(self, shift):
        """Fields evaluated at ``x - shift``."""
        shift = np.asarray(shift, dtype=float).reshape(self.dim)
        n = _mode_list(self.dim, self.Nf)
        ph = np.exp(-2j * math.pi * (n @ shift)).reshape(self.W_modes.shape)
        return ExternalFields(self.dim, self.Nf, self.W_modes * ph, self.A_modes * ph[None])

    def summability(self):
        """``(sum |W_n|, sum |A_n| (1 + |p_n|))`` with ``p_n = 2 pi n``."""
        n = _mode_list(self.dim, self.Nf)
        p = 2 * math.pi * np.linalg.norm(n, axis=1).reshape(self.W_modes.shape)
        a_abs = np.sqrt(np.sum(np.abs(self.A_modes) ** 2, axis=0))
        return float(np.sum(np.abs(self.W_modes))), float(np.sum(a_abs * (1 + p)))

    @property
    def has_A(self):
        return bool(np.any(self.A_modes))


class _Spectral:
    """Index bookkeeping between coefficient arrays and the collocation grid."""

    def __init__(self, dim, N, Nf, M=None):
        need = max(4 * N + 1, 2 * N + 2 * Nf + 1, 1)
        if M is None:
            M = next_fast_len(need)
        elif M < need:
            raise ConfigError(f"collocation grid M={M} aliases: need M >= {need}",
                              module="glfield")
        self.dim, self.N, self.Nf, self.M = dim, N, Nf, M
        self.vol = M ** dim
        self._ix = {}
        ax = _mode_axis(N).astype(float)
        self.pk = []
        for k in range(dim):
            shape = [1] * dim
            shape[k] = 2 * N + 1
            self.pk.append(2 * math.pi * ax.reshape(shape))

    def _index(self, R):
        if R not in self._ix:
            idx = _mode_axis(R) % self.M
            self._ix[R] = np.ix_(*([idx] * self.dim))
        return self._ix[R]

    def to_real(self, c, R=None):
        R = self.N if R is None else R
        arr = np.zeros((self.M,) * self.dim, dtype=complex)
        arr[self._index(R)] = c
        return ifftn(arr) * self.vol

    def to_modes(self, f):
        return (fftn(f) / self.vol)[self._index(self.N)]


class _Problem:
    """Cached real-space fields for repeated energy evaluations."""

    def __init__(self, fields, N, M=None):
        self.fields = fields
        self.sp = _Spectral(fields.dim, N, fields.Nf, M)
        self.W = self.sp.to_real(fields.W_modes, fields.Nf).real
        self.A = [self.sp.to_real(fields.A_modes[k], fields.Nf).real
                  for k in range(fields.dim)]
        self.has_A = fields.has_A

    def energy_grad(self, c, lam1, lam2, lam3, D, grad=True):
        sp = self.sp
        psi = sp.to_real(c)
        rho = (psi * np.conj(psi)).real
        kin = 0.0
        mult = (lam1 * self.W - lam2 * D) + 2.0 * lam3 * rho
        g_real = mult * psi
        g_modes = np.zeros_like(c)
        for k in range(sp.dim):
            if self.has_A:
                phi = sp.to_real(sp.pk[k] * c) + 2.0 * self.A[k] * psi
                kin += float(np.mean(np.abs(phi) ** 2))
                if grad:
                    g_real = g_real + 2.0 * self.A[k] * phi
                    g_modes = g_modes + sp.pk[k] * sp.to_modes(phi)
            else:
                kin += float(np.sum(sp.pk[k] ** 2 * np.abs(c) ** 2))
                if grad:
                    g_modes = g_modes + sp.pk[k] ** 2 * c
        e = kin + float(np.mean((lam1 * self.W - lam2 * D) * rho + lam3 * rho * rho))
        if not grad:
            return e, None
        return e, g_modes + sp.to_modes(g_real)


def _coeff_tuple(coeffs):
    if hasattr(coeffs, "lambda1"):
        return float(coeffs.lambda1), float(coeffs.lambda2), float(coeffs.lambda3)
    lam = tuple(float(x) for x in coeffs)
    if len(lam) != 3:
        raise InvalidParameterError("coefficients must be (lambda1, lambda2, lambda3)",
                                    module="glfield")
    return lam


def _check_dim(psi, fields):
    if psi.dim != fields.dim:
        raise ConfigError(f"psi has dim {psi.dim}, fields have dim {fields.dim}",
                          module="glfield")


def gl_energy(psi, fields, coeffs, D, M=None):
    """GL energy of ``psi`` on the unit cell.

    Parameters
    ----------
    psi : PeriodicField
    fields : ExternalFields
    coeffs : GLCoefficients or (lambda1, lambda2, lambda3)
    D : float
    M : int, optional
        Collocation points per axis; must avoid aliasing.
    """
    _check_dim(psi, fields)
    lam1, lam2, lam3 = _coeff_tuple(coeffs)
    return _Problem(fields, psi.N, M).energy_grad(psi.modes, lam1, lam2, lam3, D, False)[0]


def gl_energy_and_gradient(psi, fields, coeffs, D, M=None):
    """Energy and ``dE/d conj(psi_n)``.

    With ``psi_n = a_n + i b_n`` the real gradient is ``(2 Re G, 2 Im G)``.
    """
    _check_dim(psi, fields)
    lam1, lam2, lam3 = _coeff_tuple(coeffs)
    return _Problem(fields, psi.N, M).energy_grad(psi.modes, lam1, lam2, lam3, D, True)


@dataclass(frozen=True)
class GLMinOptions:
    N: int = 16
    seeds: int = 4
    seed: int = 0
    gtol: float = 1e-9
    max_iter: int = 20000
    noise: float = 1e-2
    trivial_tol: float = 1e-6
    M: int | None = None


@dataclass(frozen=True, eq=False)
class GLMinimum:
    psi: PeriodicField
    energy: float
    gradient_norm: float
    trivial: bool
    seed_energies: tuple = field(default_factory=tuple)

    def __iter__(self):
        return iter((self.psi, self.energy))


def minimize_gl(fields, coeffs, D, opts=None):
    """Minimize the GL functional by L-BFGS from several random-plus-constant starts.

    Each descent is polished by Newton-Krylov on the gradient.  The best
    stationary point is returned, with ``psi = 0`` (energy 0) always a
    candidate; ``trivial`` is set when ``||psi||_2 <= opts.trivial_tol``.

    Raises
    ------
    ConvergenceError
        A start found energy below the returned one without reaching gradient
        norm ``<= opts.gtol``.
    """
    opts = opts or GLMinOptions()
    lam1, lam2, lam3 = _coeff_tuple(coeffs)
    if not lam3 > 0:
        raise InvalidParameterError("lambda3 must be > 0", module="glfield")
    prob = _Problem(fields, opts.N, opts.M)
    shape = (2 * opts.N + 1,) * fields.dim
    n = int(np.prod(shape))

    # diagonal preconditioning: unknowns y = x sqrt(1 + |p|^2)
    p2 = sum(pk ** 2 for pk in prob.sp.pk).ravel()
    s = np.tile(1.0 / np.sqrt(1.0 + p2), 2)

    def fun_x(x):
        c = (x[:n] + 1j * x[n:]).reshape(shape)
        e, g = prob.energy_grad(c, lam1, lam2, lam3, D)
        g = g.ravel()
        return e, np.concatenate([2 * g.real, 2 * g.imag])

    def fun(y):
        e, g = fun_x(y * s)
        return e, g * s

    def polish(y):
        # energy differences stall near |g|^2 ~ eps |E|; the gradient itself stays
        # accurate, so finish with Newton-Krylov on it
        try:
            with np.errstate(invalid="ignore"):
                return newton_krylov(lambda v: fun(v)[1], y, f_tol=0.1 * opts.gtol,
                                     maxiter=50, method="lgmres")
        except (NoConvergence, ValueError, np.linalg.LinAlgError) as exc:
            return exc.args[0] if exc.args and isinstance(exc.args[0], np.ndarray) else y

    amp = math.sqrt(max(abs(lam2 * D), 1e-2) / (2 * lam3))
    rng = np.random.default_rng(opts.seed)
    # the normal state is always a stationary point
    best = (0.0, np.zeros(2 * n), 0.0)
    energies, last_gn, lowest = [], math.inf, 0.0
    for _ in range(opts.seeds):
        x0 = opts.noise * amp * rng.standard_normal(2 * n)
        x0[n // 2] += 0.5 * amp   # constant mode
        res = minimize(fun, x0 / s, jac=True, method="L-BFGS-B",
                       options={"maxiter": opts.max_iter, "ftol": 0.0, "gtol": opts.gtol * 1e-2,
                                "maxcor": 20})
        y = res.x
        e, g = fun(y)
        if res.fun < 0 and np.linalg.norm(g / s) > opts.gtol:
            y2 = polish(y)
            e2, g2 = fun(y2)
            if np.linalg.norm(g2 / s) < np.linalg.norm(g / s) and e2 <= e + 1e-12 * abs(e):
                y, e = y2, e2
        x = y * s
        e, g = fun_x(x)
        gn = float(np.linalg.norm(g))
        energies.append(e)
        lowest = min(lowest, e)
        if gn <= opts.gtol:
            if e < best[0]:
                best = (e, x, gn)
        else:
            last_gn = min(last_gn, gn)
    if lowest < best[0] - 1e-12 * max(1.0, abs(lowest)):
        raise ConvergenceError(f"GL descent did not reach gradient tolerance {opts.gtol:g}",
                               module="glfield", residual=last_gn)
    e, x, gn = best
    psi = PeriodicField(fields.dim, opts.N, (x[:n] + 1j * x[n:]).reshape(shape))
    return GLMinimum(psi, e, gn, math.sqrt(psi.norm_sq()) <= opts.trivial_tol, tuple(energies))


def _galerkin_matrix(fields, lam1, N):
    """Plane-wave matrix of ``(-i grad + 2A)^2 + lambda1 W`` on ``|n_i| <= N``."""
    dim, Nf = fields.dim, fields.Nf
    n = _mode_list(dim, N)
    p = 2 * math.pi * n
    H = np.diag(np.sum(p * p, axis=1)).astype(complex)
    diff = n[:, None, :] - n[None, :, :]

    def lookup(arr, R):
        inside = np.all(np.abs(diff) <= R, axis=2)
        out = np.zeros(inside.shape, dtype=complex)
        idx = tuple((diff[inside] + R).T)
        out[inside] = arr[idx]
        return out

    H += lam1 * lookup(fields.W_modes, Nf)
    if fields.has_A:
        for k in range(dim):
            Ak = lookup(fields.A_modes[k], Nf)
            H += 2.0 * (p[:, None, k] + p[None, :, k]) * Ak
        AA = sum(convolve(fields.A_modes[k], fields.A_modes[k]) for k in range(dim))
        H += 4.0 * lookup(np.asarray(AA), 2 * Nf)
    return H


def _lowest_mode(fields, lam1, N, dense_limit=3000, tol=1e-9):
    dim = fields.dim
    nm = (2 * N + 1) ** dim
    if nm <= dense_limit:
        H = _galerkin_matrix(fields, lam1, N)
        try:
            w, v = sla.eigh(H, subset_by_index=[0, 0])
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise AccuracyError(f"eigensolver failed: {exc}", module="glfield") from exc
        return float(w[0]), v[:, 0]
    prob = _Problem(fields, N)
    shape = (2 * N + 1,) * dim

    def matvec(x):
        c = np.asarray(x).reshape(shape)
        _, g = prob.energy_grad(c, lam1, 0.0, 0.0, 0.0)
        return g.ravel()

    op = LinearOperator((nm, nm), matvec=matvec, dtype=complex)
    p2 = sum(pk ** 2 for pk in prob.sp.pk).ravel()
    shift = 1.0 + abs(lam1) * float(np.sum(np.abs(fields.W_modes)))
    prec = LinearOperator((nm, nm), matvec=lambda x: np.asarray(x).reshape(-1) / (p2 + shift),
                          dtype=complex)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((nm, 2)) + 0j
    X[:, 0] = 0
    X[nm // 2, 0] = 1
    with warnings.catch_warnings():
        # convergence is judged by the explicit residual below
        warnings.simplefilter("ignore", UserWarning)
        w, v = lobpcg(op, X, M=prec, largest=False, tol=tol, maxiter=300)
    i = int(np.argmin(w))
    res = np.linalg.norm(matvec(v[:, i]) - w[i] * v[:, i])
    if not res <= 1e-6 * max(1.0, abs(w[i])):
        raise AccuracyError("iterative eigensolver did not converge", module="glfield",
                            residual=float(res))
    return float(w[i]), v[:, i]


def critical_D(fields, lambda1, lambda2, N=16, check=True, tol=1e-8):
    """``D_c = inf spec((-i grad + 2A)^2 + lambda1 W) / lambda2`` on modes ``|n_i| <= N``.

    With ``check`` the computation is repeated at ``N + 2`` and an
    ``AccuracyError`` is raised if ``D_c`` moves by more than
    ``tol * max(1, |D_c|)``.
    """
    if not lambda2 > 0:
        raise InvalidParameterError("lambda2 must be > 0", module="glfield")
    ev, _ = _lowest_mode(fields, lambda1, N)
    dc = ev / lambda2
    if check:
        ev2, _ = _lowest_mode(fields, lambda1, N + 2)
        move = abs(ev2 / lambda2 - dc)
        if move > tol * max(1.0, abs(dc)):
            raise AccuracyError(f"D_c not converged in the mode cutoff (moved {move:.3g})",
                                module="glfield", residual=move)
    return dc


def hessian_along_critical_mode(fields, coeffs, D, N=8):
    """``d^2/ds^2 E(s u)`` at ``s = 0`` for the normalized ``D_c`` eigenmode ``u``.

    Equals ``2 lambda2 (D_c - D)``; negative exactly when ``D > D_c``.
    """
    lam1, lam2, _ = _coeff_tuple(coeffs)
    _, v = _lowest_mode(fields, lam1, N)
    u = PeriodicField(fields.dim, N, v.reshape((2 * N + 1,) * fields.dim))
    u = u.scaled(1.0 / math.sqrt(u.norm_sq()))
    # E(s u) = s^2 Q(u) + s^4 lambda3 int |u|^4
    return 2.0 * gl_energy(u, fields, (lam1, lam2, 0.0), D)


@dataclass(frozen=True)
class PhaseCall:
    D: float
    D_c: float
    linear_superconducting: bool
    nonlinear_superconducting: bool
    energy: float
    critical_window: bool

    @property
    def agree(self):
        return self.linear_superconducting == self.nonlinear_superconducting


def superconducting_phase_boundary(fields, coeffs, D, band=1e-6, opts=None):
    """Compare ``D > D_c`` with the minimizer's trivial/nontrivial call."""
    opts = opts or GLMinOptions()
    lam1, lam2, _ = _coeff_tuple(coeffs)
    dc = critical_D(fields, lam1, lam2, opts.N, check=False)
    res = minimize_gl(fields, coeffs, D, opts)
    return PhaseCall(D, dc, D > dc, not res.trivial, res.energy, abs(D - dc) <= band)


_AXES = {"x": 0, "y": 1, "z": 2}


def parse_fields(text):
    """Parse ``W n1 .. nd re im`` and ``A axis n1 .. nd re im`` lines.

    ``n`` are integer mode indices (momentum ``2 pi n``); ``axis`` is ``x``,
    ``y``, ``z`` or 1-based.  Missing Hermitian partners ``(-n)`` are filled
    with the conjugate; inconsistent partners raise ``ConfigError``.
    Blank lines and ``#`` comments are ignored.
    """
    W, A, dim = {}, {}, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        tag = tok[0].upper()
        try:
            if tag == "W":
                axis, rest = None, tok[1:]
            elif tag == "A":
                a = tok[1].lower()
                axis = _AXES[a] if a in _AXES else int(a) - 1
                rest = tok[2:]
            else:
                raise ValueError(f"unknown tag {tok[0]!r}")
            d = len(rest) - 2
            n = tuple(int(x) for x in rest[:d])
            val = complex(float(rest[d]), float(rest[d + 1]))
        except (ValueError, IndexError, KeyError) as exc:
            raise ConfigError(f"fields line {lineno}: {exc}", module="glfield") from exc
        if dim is None:
            dim = d
        if d != dim or d not in (1, 2, 3):
            raise ConfigError(f"fields line {lineno}: inconsistent dimension", module="glfield")
        if axis is not None and not 0 <= axis < dim:
            raise ConfigError(f"fields line {lineno}: axis out of range", module="glfield")
        target = W if axis is None else A.setdefault(axis, {})
        if n in target:
            raise ConfigError(f"fields line {lineno}: duplicate mode {n}", module="glfield")
        target[n] = val
    if dim is None:
        raise ConfigError("fields file defines no modes", module="glfield")

    def complete(d_):
        out = dict(d_)
        for n, v in d_.items():
            m = tuple(-x for x in n)
            if m in d_:
                if abs(d_[m] - np.conj(v)) > _HERM_TOL * max(1.0, abs(v)):
                    raise ConfigError(f"mode {n} and {m} are not complex conjugates",
                                      module="glfield")
            else:
                out[m] = np.conj(v)
        return out

    W = complete(W)
    A = {k: complete(v) for k, v in A.items()}
    allmodes = list(W) + [n for v in A.values() for n in v]
    Nf = max((max(abs(x) for x in n) for n in allmodes), default=0)
    shape = (2 * Nf + 1,) * dim
    Wm = np.zeros(shape, dtype=complex)
    Am = np.zeros((dim,) + shape, dtype=complex)
    for n, v in W.items():
        Wm[tuple(x + Nf for x in n)] = v
    for k, modes in A.items():
        for n, v in modes.items():
            Am[(k,) + tuple(x + Nf for x in n)] = v
    try:
        return ExternalFields(dim, Nf, Wm, Am)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), module="glfield") from exc


def read_fields(path):
    return parse_fields(Path(path).read_text(encoding="utf-8"))
