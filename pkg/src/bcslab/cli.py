"""Command-line front end: ``bcslab <command> [options]``.

Every command writes a CSV table (17 significant digits) and, when an
output file is given, a JSON-lines manifest next to it with the inputs,
tolerances, library versions and timings.

Exit codes: 0 success, 2 domain error, 3 accuracy error or failed
verification, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .dispersion import ThermoPoint, m_mu
from .errors import (AccuracyError, BCSLabError, ConfigError, DomainError,
                     InvalidParameterError)
from .gapsolve import GapOptions, energy_gap, solve_gap, verify_gap_residual
from .glcoeff import gl_coefficients
from .glfield import GLMinOptions, critical_D, minimize_gl, read_fields
from .potential import RadialPotential
from .scatter import scattering_length
from .specfun import GridOptions
from .tcrit import (TcOptions, UNIVERSAL_RATIO, b_mu, critical_temperature, e_channel,
                    gap_zero_range, tc_low_density_formula, tc_weak_coupling_formula,
                    tc_zero_range)

EXIT_OK, EXIT_DOMAIN, EXIT_ACCURACY, EXIT_CONFIG = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, module="cli")


def _ladder(text):
    """Comma-separated floats, finite and strictly monotone."""
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"values must be finite: {text!r}")
    d = np.diff(vals)
    if len(vals) > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise argparse.ArgumentTypeError(f"ladder must be strictly monotone: {text!r}")
    return vals


def _finite(text):
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return v


# -- command bodies (module level so that worker processes can pickle them) --

def _grid(args):
    return GridOptions(cutoff=args.cutoff, points_per_panel=args.points_per_panel,
                       panels_per_decade=args.panels_per_decade)


def _potential(args, lam=None):
    V = RadialPotential.from_spec(args.potential)
    return V.scaled(lam) if lam is not None else V


def _gap_row(args, T):
    V = _potential(args, args.coupling[0])
    sol = solve_gap(V, args.ell, ThermoPoint(T, args.mu), GapOptions(grid=_grid(args)))
    F, Fn = sol.free_energy_density, sol.normal_free_energy_density
    return {"T": T, "trivial": sol.trivial, "energy_gap": energy_gap(sol, V),
            "free_energy": F, "normal_free_energy": Fn,
            "gap_residual": verify_gap_residual(sol), "method": sol.method,
            "nodes": sol.grid.size}


def _tc_row(args, lam):
    rep = critical_temperature(_potential(args, lam), args.mu,
                               TcOptions(ell_max=args.ell_max, rtol=args.rtol,
                                         grid=_grid(args)))
    return {"lambda": lam, "tc": rep.tc, "channel": rep.channel,
            "bracket_lo": rep.bracket[0], "bracket_hi": rep.bracket[1],
            "eigenvalue_at_tc": rep.eigenvalue_at_tc, "degenerate": rep.degenerate}


def _bmu_row(args, lam):
    V = _potential(args)
    b, ell, det = b_mu(V, args.mu, lam, ell_max=args.ell_max, grid_opts=_grid(args))
    e, w, _ = det["channels"][ell]
    return {"lambda": lam, "b_mu": b, "channel": ell, "e": e, "w": w,
            "tc_formula": tc_weak_coupling_formula(V, args.mu, lam, b=b) if b < 0 else 0.0}


def _ratio_row(args, lam):
    from .gapsolve import solve_gap_T0
    V = _potential(args, lam)
    tc = critical_temperature(V, args.mu, TcOptions(ell_max=0, grid=_grid(args))).tc
    gap = energy_gap(solve_gap_T0(V, 0, args.mu, GapOptions(grid=_grid(args))), V)
    r = gap / tc
    return {"lambda": lam, "energy_gap": gap, "tc": tc, "ratio": r,
            "deviation": abs(r - UNIVERSAL_RATIO) / UNIVERSAL_RATIO}


def _glmin_row(args, D):
    fields = read_fields(args.fields)
    res = minimize_gl(fields, (args.lambda1, args.lambda2, args.lambda3), D,
                      GLMinOptions(N=args.modes, seeds=args.seeds, seed=args.seed))
    return {"D": D, "energy": res.energy, "norm_sq": res.psi.norm_sq(),
            "trivial": res.trivial, "gradient_norm": res.gradient_norm}


def _fan_out(fn, args, values):
    """Evaluate ``fn(args, v)`` for each ladder value, results in ladder order."""
    if args.workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            return list(ex.map(fn, [args] * len(values), values))
    return [fn(args, v) for v in values]


def cmd_gap(args):
    return _fan_out(_gap_row, args, args.T)


def cmd_tc(args):
    return _fan_out(_tc_row, args, args.coupling)


def cmd_emu(args):
    V = _potential(args, args.coupling[0])
    rows = [{"ell": ell, "e": e_channel(V, ell, args.mu)} for ell in range(args.ell_max + 1)]
    best = min(rows, key=lambda r: r["e"])
    rows.append({"ell": "min", "e": best["e"]})
    return rows


def cmd_bmu(args):
    return _fan_out(_bmu_row, args, args.coupling)


def cmd_scatlen(args):
    V = _potential(args, args.coupling[0])
    rep = scattering_length(V, method=args.method)
    return [{"a": rep.a, "bs_spectrum_floor": rep.bs_spectrum_floor, "method": rep.method}]


def cmd_zerorange(args):
    a, mu = args.a, args.mu
    tc = tc_zero_range(a, mu)
    rows = [{"T": "tc", "value": tc},
            {"T": "tc_formula", "value": tc_low_density_formula(a, mu)}]
    for T in args.T or []:
        rows.append({"T": T, "value": gap_zero_range(a, mu, T, tc=tc)})
    return rows


def cmd_mmu(args):
    return [{"T": T, "m_mu": m_mu(ThermoPoint(T, args.mu))} for T in args.T]


def cmd_xi_ratio(args):
    return _fan_out(_ratio_row, args, args.coupling)


def cmd_glcoeff(args):
    c = gl_coefficients(_potential(args, args.coupling[0]), args.mu, grid_opts=_grid(args))
    row = {"tc": c.tc, "lambda0": c.lambda0, "lambda1": c.lambda1, "lambda2": c.lambda2,
           "lambda3": c.lambda3, "route_discrepancy": c.route_discrepancy}
    if args.D is not None:
        row["kappa"] = c.kappa(args.D)
    return [row]


def cmd_dc(args):
    fields = read_fields(args.fields)
    return [{"D_c": critical_D(fields, args.lambda1, args.lambda2, N=args.modes,
                               check=not args.no_check)}]


def cmd_glmin(args):
    return _fan_out(_glmin_row, args, args.D)


def cmd_verify(args):
    from .verification import SUITES, run_suite
    names = args.suite or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s) {unknown}; available: {', '.join(SUITES)}",
                          module="cli")
    rows = []
    for n in names:
        r = run_suite(n)
        print(f"{'PASS' if r.passed else 'FAIL'}  [{r.criterion:2d}] {r.name}: {r.detail}",
              file=sys.stderr)
        rows.append({"criterion": r.criterion, "suite": r.name,
                     "status": "PASS" if r.passed else "FAIL", "detail": r.detail})
        args.timings[r.name] = round(r.seconds, 3)
    return rows


# -- parser -----------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="key = value file; command-line flags take precedence")
    p.add_argument("--output", default="-", help="CSV path ('-' for stdout)")
    p.add_argument("--manifest", help="JSON-lines manifest path (default: OUTPUT.manifest.jsonl)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def _add_physics(p, potential=True, ladder_T=False, T_required=False):
    if potential:
        p.add_argument("--potential", required=True,
                       help="e.g. gaussian:v=5,s=1 or tabulated:file=V.txt")
        p.add_argument("--lambda", dest="coupling", type=_ladder, default=[1.0],
                       help="coupling or comma-separated ladder")
    p.add_argument("--mu", type=_finite, default=1.0)
    if ladder_T:
        p.add_argument("--T", type=_ladder, required=T_required, help="temperature(s)")
    p.add_argument("--cutoff", type=_finite, default=None)
    p.add_argument("--points-per-panel", type=int, default=12)
    p.add_argument("--panels-per-decade", type=int, default=3)


def build_parser():
    ap = _Parser(prog="bcslab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"bcslab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gap", help="solve the gap equation")
    _add_physics(p, ladder_T=True, T_required=True)
    p.add_argument("--ell", type=int, default=0)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("tc", help="critical temperature")
    _add_physics(p)
    p.add_argument("--ell-max", type=int, default=8)
    p.add_argument("--rtol", type=_finite, default=1e-6)
    p.set_defaults(func=cmd_tc)

    p = sub.add_parser("emu", help="Fermi-sphere channel eigenvalues")
    _add_physics(p)
    p.add_argument("--ell-max", type=int, default=8)
    p.set_defaults(func=cmd_emu)

    p = sub.add_parser("bmu", help="second-order spectral constant b_mu(lambda)")
    _add_physics(p)
    p.add_argument("--ell-max", type=int, default=8)
    p.set_defaults(func=cmd_bmu)

    p = sub.add_parser("mmu", help="the counterterm m_mu(T)")
    _add_physics(p, potential=False, ladder_T=True, T_required=True)
    p.set_defaults(func=cmd_mmu)

    p = sub.add_parser("scatlen", help="scattering length")
    p.add_argument("--potential", required=True)
    p.add_argument("--lambda", dest="coupling", type=_ladder, default=[1.0])
    p.add_argument("--method", choices=("resolvent", "ode_oracle"), default="resolvent")
    p.set_defaults(func=cmd_scatlen)

    p = sub.add_parser("zerorange", help="zero-range T_c and gap")
    _add_physics(p, potential=False, ladder_T=True)
    p.add_argument("--a", type=_finite, required=True, help="scattering length (< 0)")
    p.set_defaults(func=cmd_zerorange)

    p = sub.add_parser("xi-ratio", help="energy gap over T_c along a coupling ladder")
    _add_physics(p)
    p.set_defaults(func=cmd_xi_ratio)

    p = sub.add_parser("glcoeff", help="Ginzburg-Landau coefficients")
    _add_physics(p)
    p.add_argument("--D", type=_finite, default=None, help="also report kappa(D)")
    p.set_defaults(func=cmd_glcoeff)

    p = sub.add_parser("dc", help="critical parameter D_c for external fields")
    p.add_argument("--fields", required=True)
    p.add_argument("--lambda1", type=_finite, required=True)
    p.add_argument("--lambda2", type=_finite, required=True)
    p.add_argument("--modes", type=int, default=16, help="mode radius N")
    p.add_argument("--no-check", action="store_true", help="skip the N+2 convergence check")
    p.set_defaults(func=cmd_dc)

    p = sub.add_parser("glmin", help="minimize the GL functional")
    p.add_argument("--fields", required=True)
    p.add_argument("--lambda1", type=_finite, required=True)
    p.add_argument("--lambda2", type=_finite, required=True)
    p.add_argument("--lambda3", type=_finite, required=True)
    p.add_argument("--D", type=_ladder, required=True)
    p.add_argument("--modes", type=int, default=16)
    p.add_argument("--seeds", type=int, default=4)
    p.set_defaults(func=cmd_glmin)

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("--suite", action="append", help="suite name (repeatable); default all")
    p.set_defaults(func=cmd_verify)

    for sp in sub.choices.values():
        _add_common(sp)
    return ap


# -- config, output ---------------------------------------------------------

def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", module="cli") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'", module="cli")
        k, v = (t.strip() for t in line.split("=", 1))
        k = k.replace("_", "-")
        if k in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {k!r}", module="cli")
        out[k] = v
    return out


def _config_argv(sub, cfg):
    """Translate config entries to flags, rejecting keys the command does not take."""
    known = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:]] = action
    argv = []
    for k, v in cfg.items():
        if k in ("config",) or k not in known:
            raise ConfigError(f"unknown config key {k!r}", module="cli")
        action = known[k]
        if action.nargs == 0:
            if v.lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{k}")
            elif v.lower() not in ("0", "false", "no", "off"):
                raise ConfigError(f"config key {k!r} expects a boolean", module="cli")
        elif isinstance(action, argparse._AppendAction):
            for item in v.split(","):
                argv += [f"--{k}", item.strip()]
        else:
            argv += [f"--{k}", v]
    return argv


def _format(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(rows, stream):
    cols = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_format(r.get(c, "")) for c in cols])


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, Path):
        return str(v)
    return v


def _parse(argv):
    ap = build_parser()
    argv = list(argv)
    # locate the subcommand and splice config-derived flags before user flags
    cfg_path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            cfg_path = argv[i + 1]
        elif a.startswith("--config="):
            cfg_path = a.split("=", 1)[1]
    if cfg_path is not None:
        cmd = next((a for a in argv if not a.startswith("-")), None)
        subs = ap._subparsers._group_actions[0].choices
        if cmd not in subs:
            raise ConfigError("a subcommand is required before --config", module="cli")
        extra = _config_argv(subs[cmd], read_config(cfg_path))
        k = argv.index(cmd)
        argv = argv[:k + 1] + extra + argv[k + 1:]
    return ap.parse_args(argv)


def run(argv=None):
    """Execute one command; returns the process exit code."""
    argv = sys.argv[1:] if argv is None else argv
    t0 = time.perf_counter()
    try:
        args = _parse(argv)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1", module="cli")
        np.random.seed(args.seed)
        args.timings = {}
        rows = args.func(args)
        code = EXIT_OK
        if args.command == "verify" and any(r["status"] != "PASS" for r in rows):
            code = EXIT_ACCURACY
    except DomainError as exc:
        _report(exc)
        return EXIT_DOMAIN
    except (ConfigError, InvalidParameterError) as exc:
        _report(exc)
        return EXIT_CONFIG
    except (AccuracyError, BCSLabError) as exc:
        _report(exc)
        return EXIT_ACCURACY
    except (OSError, ValueError) as exc:
        _report(exc)
        return EXIT_CONFIG

    buf = io.StringIO()
    write_csv(rows, buf)
    if args.output == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(args.output).write_text(buf.getvalue(), encoding="utf-8")
    manifest = args.manifest or (None if args.output == "-" else args.output + ".manifest.jsonl")
    if manifest:
        record = {
            "command": args.command,
            "argv": list(argv),
            "inputs": {k: _jsonable(v) for k, v in vars(args).items()
                       if k not in ("func", "timings")},
            "tolerances": _tolerances(args),
            "versions": {"bcslab": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
            "rows": len(rows),
            "output": args.output,
            "exit_code": code,
            "seconds": round(time.perf_counter() - t0, 3),
            "timings": args.timings,
        }
        with open(manifest, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return code


def _tolerances(args):
    tol = {"csv_digits": 17}
    if args.command in ("gap", "xi-ratio"):
        g = GapOptions()
        tol.update(gap_tol=g.tol, trivial_floor=g.trivial_floor)
    if args.command in ("tc", "xi-ratio", "glcoeff"):
        tol.update(tc_rtol=getattr(args, "rtol", TcOptions().rtol))
    if args.command == "glcoeff":
        tol.update(t_route_rtol=1e-6)
    if args.command == "glmin":
        tol.update(gradient_tol=GLMinOptions().gtol)
    if args.command == "dc":
        tol.update(truncation_tol=1e-8)
    return tol


def _report(exc):
    msg = f"error: {exc}"
    mod = getattr(exc, "module", None)
    res = getattr(exc, "residual", None)
    if mod:
        msg = f"error [{mod}]: {exc}"
    if res is not None:
        msg += f" (residual {res:.3g})"
    print(msg, file=sys.stderr)


def main(argv=None):
    return run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
