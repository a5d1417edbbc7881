"""Command-line front end: convergence studies, single solves, self-checks.

    vkctrl study  --case ex1 --levels 1..4 --out results/
    vkctrl solve  --case ex1 --levels 1
    vkctrl verify [--list]

Configuration precedence is flag > config file > default.  The config
file is plain `key = value` lines (# comments allowed) with the same
keys as the long flags: case, levels, alpha, ua, ub, omega,
quad_assembly, quad_error, tol_newton, tol_pdas, out, format.  The
environment variable VKCTRL_OUT supplies the default output directory.
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import cases, convergence, optimize, solvers, verify
from .assembly import Discretization
from .mesh import build_mesh


class ConfigError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    case: str = "ex1"
    levels: tuple = None          # (first, last); command-specific default
    alpha: float = None           # None keeps the case value
    ua: float = None
    ub: float = None
    omega: tuple = None           # (x0, y0, x1, y1) control rectangle
    quad_assembly: int = 5
    quad_error: int = 7
    tol_newton: float = 1e-10     # relative Newton residual tolerance
    tol_pdas: float = 1e-9
    out: str = None
    formats: tuple = ("csv", "md")


_FORMATS = ("csv", "md", "dat")


def _parse_levels(text):
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
    else:
        lo = hi = int(text)
    if hi < lo:
        raise ConfigError(f"levels: descending range {text!r}")
    return lo, hi


def _parse_value(key, text):
    try:
        if key == "levels":
            return _parse_levels(text)
        if key in ("alpha", "ua", "ub", "tol_newton", "tol_pdas"):
            return float(text)
        if key in ("quad_assembly", "quad_error"):
            return int(text)
        if key == "omega":
            parts = [float(p) for p in text.replace(",", " ").split()]
            if len(parts) != 4:
                raise ValueError("need x0 y0 x1 y1")
            return tuple(parts)
        if key == "format":
            fmts = tuple(f.strip() for f in text.split(",") if f.strip())
            bad = [f for f in fmts if f not in _FORMATS]
            if bad:
                raise ValueError(f"unknown format {bad[0]!r}")
            return fmts
        if key in ("case", "out"):
            return text
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(f"{key}: {err}") from err
    raise ConfigError(f"unknown config key {key!r}")


def _read_config(path):
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, text = (part.strip() for part in line.split("=", 1))
                values[key] = _parse_value(key, text)
    except OSError as err:
        raise ConfigError(f"config: {err}") from err
    return values


def build_config(args):
    cfg = RunConfig()
    if args.config:
        for key, value in _read_config(args.config).items():
            attr = "formats" if key == "format" else key
            setattr(cfg, attr, value)
    flag_map = {
        "case": args.case,
        "alpha": args.alpha,
        "ua": args.ua,
        "ub": args.ub,
        "quad_assembly": args.quad_assembly,
        "quad_error": args.quad_error,
        "tol_newton": args.tol_newton,
        "tol_pdas": args.tol_pdas,
        "out": args.out,
    }
    for key, value in flag_map.items():
        if value is not None:
            setattr(cfg, key, value)
    if args.levels is not None:
        cfg.levels = _parse_levels(args.levels)
    if args.format is not None:
        cfg.formats = _parse_value("format", args.format)
    if cfg.out is None:
        cfg.out = os.environ.get("VKCTRL_OUT", ".")
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg.case not in ("ex1", "ex2"):
        raise ConfigError(f"case: unknown case {cfg.case!r}")
    if not 1 <= cfg.quad_assembly <= 12:
        raise ConfigError(f"quad_assembly: {cfg.quad_assembly} outside [1, 12]")
    if not 1 <= cfg.quad_error <= 12:
        raise ConfigError(f"quad_error: {cfg.quad_error} outside [1, 12]")
    if cfg.tol_newton <= 0:
        raise ConfigError("tol_newton: must be positive")
    if cfg.tol_pdas <= 0:
        raise ConfigError("tol_pdas: must be positive")
    if cfg.alpha is not None and cfg.alpha <= 0:
        raise ConfigError("alpha: must be positive")
    if cfg.ua is not None and cfg.ub is not None and cfg.ua > cfg.ub:
        raise ConfigError(f"ua: lower bound {cfg.ua} exceeds ub {cfg.ub}")


def _make_case(cfg):
    case = cases.make_case(cfg.case)
    if cfg.alpha is not None:
        case.alpha = cfg.alpha
    if cfg.ua is not None:
        case.lower = cfg.ua
    if cfg.ub is not None:
        case.upper = cfg.ub
    return case


def _pdas_options(cfg):
    newton = solvers.NewtonOptions(tol_rel=cfg.tol_newton)
    return optimize.PdasOptions(tol_u=cfg.tol_pdas, newton=newton)


def _fmt(x):
    return f"{x:.8g}"


#: column layout of the two table groups, mirroring the report tables
TABLE_GROUPS = {
    "control": ("state_energy", "adjoint_energy", "control_l2", "postproc_l2"),
    "state": ("state_h1", "state_l2", "adjoint_h1", "adjoint_l2"),
}

COLUMN_TITLES = {
    "state_energy": "state_energy",
    "adjoint_energy": "adjoint_energy",
    "control_l2": "control",
    "postproc_l2": "postproc",
    "state_h1": "state_h1",
    "state_l2": "state_l2",
    "adjoint_h1": "adjoint_h1",
    "adjoint_l2": "adjoint_l2",
}


def _write_tables(table, cfg):
    os.makedirs(cfg.out, exist_ok=True)
    written = []
    for group, columns in TABLE_GROUPS.items():
        errs = {c: table.errors(c) for c in columns}
        eocs = {c: table.eoc_column(c) for c in columns}
        nrows = len(table.records)
        if "csv" in cfg.formats:
            path = os.path.join(cfg.out, f"table_{group}.csv")
            with open(path, "w") as fh:
                header = ["N", "h_over_h0"]
                for c in columns:
                    header += [f"{COLUMN_TITLES[c]}_err", f"{COLUMN_TITLES[c]}_eoc"]
                fh.write(",".join(header) + "\n")
                for i in range(nrows):
                    rec = table.records[i]
                    row = [str(rec.n_free), _fmt(rec.h_ratio)]
                    for c in columns:
                        row.append(_fmt(errs[c][i]))
                        row.append("-" if np.isnan(eocs[c][i]) else _fmt(eocs[c][i]))
                    fh.write(",".join(row) + "\n")
            written.append(path)
        if "md" in cfg.formats:
            path = os.path.join(cfg.out, f"table_{group}.md")
            with open(path, "w") as fh:
                head = ["N", "h/h0"]
                for c in columns:
                    head += [COLUMN_TITLES[c], "eoc"]
                fh.write("| " + " | ".join(head) + " |\n")
                fh.write("|" + "---|" * len(head) + "\n")
                for i in range(nrows):
                    rec = table.records[i]
                    row = [str(rec.n_free), _fmt(rec.h_ratio)]
                    for c in columns:
                        row.append(_fmt(errs[c][i]))
                        row.append("-" if np.isnan(eocs[c][i]) else f"{eocs[c][i]:.3f}")
                    fh.write("| " + " | ".join(row) + " |\n")
            written.append(path)
    if "dat" in cfg.formats:
        hs = table.hs
        for column in convergence.ERROR_COLUMNS:
            path = os.path.join(cfg.out, f"{COLUMN_TITLES[column]}.dat")
            with open(path, "w") as fh:
                for h, e in zip(hs, table.errors(column)):
                    fh.write(f"{_fmt(h)} {_fmt(e)}\n")
            written.append(path)
    return written


def cmd_study(args):
    cfg = build_config(args)
    if cfg.levels is None:
        cfg.levels = (1, 3)
    case = _make_case(cfg)
    levels = range(cfg.levels[0], cfg.levels[1] + 1)
    try:
        table = convergence.run_study(
            case, levels, quad_forms=cfg.quad_assembly, quad_errors=cfg.quad_error,
            pdas_opts=_pdas_options(cfg), omega=cfg.omega,
            progress=lambda level, disc, sol, rec: print(
                f"level {level}: N={rec.n_free} outer={sol.outer_iterations} "
                f"cost={sol.cost:.8g}"))
    except RuntimeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for path in _write_tables(table, cfg):
        print(f"wrote {path}")
    return 0


def cmd_solve(args):
    cfg = build_config(args)
    if cfg.levels is None:
        cfg.levels = (1, 1)
    if cfg.levels[0] != cfg.levels[1]:
        raise ConfigError(f"levels: solve needs a single level, got "
                          f"{cfg.levels[0]}..{cfg.levels[1]}")
    level = cfg.levels[0]
    case = _make_case(cfg)
    disc = Discretization(build_mesh(case.domain, level),
                          quad_forms=cfg.quad_assembly, quad_errors=cfg.quad_error)
    try:
        sol = optimize.solve_case(disc, case, omega=cfg.omega,
                                  opts=_pdas_options(cfg))
    except (solvers.NewtonError, optimize.PdasError) as err:
        print(f"error at level {level}: {err}", file=sys.stderr)
        return 1
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, f"solution_{cfg.case}_level{level}.txt")
    with open(path, "w") as fh:
        ncells = len(sol.control.values)
        fh.write(f"{ncells} 2 {disc.n_free}\n")
        for v in sol.control.values:
            fh.write(f"{v!r}\n")
        for field in (sol.state.first, sol.state.second):
            for v in field.coeffs:
                fh.write(f"{v!r}\n")
    print(f"wrote {path} (cost {sol.cost:.8g}, "
          f"{sol.outer_iterations} outer iterations)")
    return 0


def cmd_verify(args):
    if args.list:
        for name in verify.property_names():
            print(name)
        return 0
    ok = verify.run_all()
    return 0 if ok else 1


def _add_common(parser):
    parser.add_argument("--case", choices=None, default=None,
                        help="benchmark case id (ex1 or ex2)")
    parser.add_argument("--levels", default=None, metavar="A..B",
                        help="refinement level range, e.g. 1..4")
    parser.add_argument("--alpha", type=float, default=None,
                        help="regularization weight override")
    parser.add_argument("--ua", type=float, default=None, help="lower control bound")
    parser.add_argument("--ub", type=float, default=None, help="upper control bound")
    parser.add_argument("--quad-assembly", dest="quad_assembly", type=int, default=None,
                        help="Gauss points per direction for form assembly")
    parser.add_argument("--quad-error", dest="quad_error", type=int, default=None,
                        help="Gauss points per direction for loads and error norms")
    parser.add_argument("--tol-newton", dest="tol_newton", type=float, default=None,
                        help="relative Newton residual tolerance")
    parser.add_argument("--tol-pdas", dest="tol_pdas", type=float, default=None,
                        help="active-set control update tolerance")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--format", default=None,
                        help="comma list of output formats (csv,md,dat)")
    parser.add_argument("--config", default=None, help="key=value config file")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="vkctrl",
                                     description="clamped-plate control benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    p_study = sub.add_parser("study", help="convergence study over mesh levels")
    _add_common(p_study)
    p_solve = sub.add_parser("solve", help="single-level control solve and dump")
    _add_common(p_solve)
    p_verify = sub.add_parser("verify", help="run the fast property suite")
    p_verify.add_argument("--list", action="store_true",
                          help="print property names without running")
    args = parser.parse_args(argv)

    try:
        if args.command == "study":
            return cmd_study(args)
        if args.command == "solve":
            return cmd_solve(args)
        return cmd_verify(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
