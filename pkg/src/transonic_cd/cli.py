"""Command-line driver: read a config, solve, write fields and diagnostics.

Exit codes: 0 converged, 1 bad input (config, gates, I/O), 2 a validated
problem whose iteration diverged or left the admissible state space.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import supersonic as sup
from .config import ProblemSpec, parse_config
from .coupling import TransonicSolution, build_problem, solve_full, validate_problem
from .errors import ConfigError, DivergenceError, TransonicError

log = logging.getLogger("transonic_cd")

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED = 0, 1, 2

LAGRANGIAN_COLUMNS = ("xi", "eta", "region", "u", "v", "p", "rho", "z_minus", "z_plus", "phi")
PHYSICAL_COLUMNS = ("x", "y", "region", "u", "v", "p", "rho")
CONTACT_COLUMNS = ("x", "g_cd", "slope")
ITERATION_COLUMNS = ("flux_iteration", "m_e", "sweep", "sweep_difference", "ratio", "inner_iterations",
                     "corner_metric", "min_ellipticity", "flux_step", "trust_limited")
PLOT_FILES = ("contact_pressure.dat", "mach_field.dat", "characteristics.dat")


def fmt(x) -> str:
    """17 significant digits; '%' formatting ignores the locale."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _region_rows(sol: TransonicSolution, physical: bool):
    dom, inl = sol.domain, sol.problem.inlet
    nan = math.nan
    fs, fh = sol.sub_fields, sol.sup_fields
    phi = sol.stream.phi
    zm, zp = sol.riemann.z_minus, sol.riemann.z_plus
    for i, x in enumerate(dom.xi):
        for k, e in enumerate(inl.eta_sup):
            state = (fh["u"][i, k], fh["v"][i, k], fh["p"][i, k], fh["rho"][i, k])
            if physical:
                yield (x, sol.y_sup[i, k], "sup", *state)
            else:
                yield (x, e, "sup", *state, zm[i, k], zp[i, k], nan)
        for j, e in enumerate(dom.eta_sub):
            state = (fs["u"][i, j], fs["v"][i, j], fs["p"][i, j], fs["rho"][i, j])
            if physical:
                yield (x, sol.y_sub[i, j], "sub", *state)
            else:
                yield (x, e, "sub", *state, nan, nan, phi[i, j])


def iteration_rows(history: dict):
    steps = history.get("flux_steps", [])
    for n, s in enumerate(history.get("sweeps", []), start=1):
        step = steps[n - 1] if n - 1 < len(steps) else math.nan
        for k, d in enumerate(s["diffs"]):
            yield (n, s["m_e"], k + 1, d, s["ratios"][k], s["inner"][k], s["corner"][k], s["lam_min"][k],
                   step, bool(s["limited"]))
    # sweeps of an unfinished flux iteration (divergence)
    partial = history.get("sweep_diffs", [])
    ratios = history.get("ratios", [])
    n = len(history.get("sweeps", [])) + 1
    for k, d in enumerate(partial):
        r = ratios[k] if k < len(ratios) else math.nan
        yield (n, history.get("m_e", math.nan), k + 1, d, r, math.nan, math.nan, math.nan, math.nan, False)


def write_outputs(sol: TransonicSolution, out_dir: Path):
    """Fields, contact line, diagnostics and iteration history; column order is fixed."""
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_rows(out_dir / "fields_lagrangian.csv", LAGRANGIAN_COLUMNS, _region_rows(sol, False))
    _write_rows(out_dir / "fields_physical.csv", PHYSICAL_COLUMNS, _region_rows(sol, True))
    _write_rows(out_dir / "contact.csv", CONTACT_COLUMNS, zip(sol.xi, sol.g_cd, sol.slope))
    _write_rows(out_dir / "iterations.csv", ITERATION_COLUMNS, iteration_rows(sol.history))
    with open(out_dir / "diagnostics.json", "w", encoding="utf-8") as fh:
        json.dump(sol.diagnostics.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_plot_data(sol: TransonicSolution, out_dir) -> list[Path]:
    """Whitespace-separated slices for gnuplot; nothing is rendered.

    ``contact_pressure.dat``: x, pressure on the subsonic and supersonic side.
    ``mach_field.dat``: x, y, Mach as scan blocks; dataset 0 supersonic,
    dataset 1 subsonic (select with ``index``).
    ``characteristics.dat``: traced characteristics, one dataset per path,
    columns xi, eta, family, transported invariant.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gamma = sol.problem.gas.gamma
    fs, fh = sol.sub_fields, sol.sup_fields
    paths = [out_dir / name for name in PLOT_FILES]

    with open(paths[0], "w", encoding="utf-8") as fh_:
        fh_.write("# x p_subsonic p_supersonic\n")
        for i, x in enumerate(sol.xi):
            fh_.write(f"{fmt(x)} {fmt(fs['p'][i, 0])} {fmt(fh['p'][i, -1])}\n")

    def mach(f):
        return np.sqrt((f["u"] ** 2 + f["v"] ** 2) * f["rho"] / (gamma * f["p"]))

    with open(paths[1], "w", encoding="utf-8") as fh_:
        fh_.write("# x y mach\n")
        for n, (f, y) in enumerate(((fh, sol.y_sup), (fs, sol.y_sub))):
            if n:
                fh_.write("\n\n")
            m = mach(f)
            for i, x in enumerate(sol.xi):
                for k in range(m.shape[1]):
                    fh_.write(f"{fmt(x)} {fmt(y[i, k])} {fmt(m[i, k])}\n")
                fh_.write("\n")

    eta = sol.riemann.eta
    with open(paths[2], "w", encoding="utf-8") as fh_:
        fh_.write("# xi eta family invariant\n")
        first = True
        for frac in (0.25, 0.5, 0.75):
            for family in (1, -1):
                path = sup.trace_characteristic(sol.riemann, eta[0] + frac * (eta[-1] - eta[0]), family)
                if not first:
                    fh_.write("\n\n")
                first = False
                for row in zip(path.xi, path.eta, path.family, path.invariant):
                    fh_.write(" ".join(fmt(v) for v in row) + "\n")
    return paths


def _parse_grid(text: str):
    try:
        nx, ny_sub, ny_sup = (int(t) for t in text.split(","))
    except ValueError:
        raise ConfigError(f"--grid expects NX,NY_SUB,NY_SUP, got {text!r}") from None
    if min(nx, ny_sub, ny_sup) < 17:
        raise ConfigError(f"grid resolutions must be at least 17, got {text!r}")
    return nx, ny_sub, ny_sup


def apply_overrides(spec: ProblemSpec, args) -> ProblemSpec:
    kw = {}
    if getattr(args, "grid", None):
        kw["nx"], kw["ny_sub"], kw["ny_sup"] = _parse_grid(args.grid)
    if getattr(args, "out_dir", None):
        kw["output_dir"] = args.out_dir
    if getattr(args, "emit_plots", False):
        kw["emit_plots"] = True
    ctl = spec.controls
    if getattr(args, "max_sweeps", None) is not None:
        if args.max_sweeps < 1:
            raise ConfigError("--max-sweeps must be at least 1")
        ctl = replace(ctl, max_outer=args.max_sweeps)
    if getattr(args, "tol", None) is not None:
        if not args.tol > 0.0:
            raise ConfigError("--tol must be positive")
        ctl = replace(ctl, tol_outer=args.tol)
    return spec.replace(controls=ctl, **kw)


def check_spec(spec: ProblemSpec):
    """All gates short of solving; returns the built problem or raises TransonicError."""
    problem = build_problem(spec)
    report = validate_problem(problem)
    if not report.passed:
        raise ConfigError("validation failed:\n" + report.summary())
    return problem


def cmd_validate(args) -> int:
    spec = apply_overrides(parse_config(args.config), args)
    check_spec(spec)
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_solve(args) -> int:
    spec = apply_overrides(parse_config(args.config), args)
    problem = check_spec(spec)
    out_dir = Path(spec.output_dir)
    try:
        sol = solve_full(problem)
    except DivergenceError as exc:
        log.error("%s", exc)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            _write_rows(out_dir / "iterations.csv", ITERATION_COLUMNS, iteration_rows(exc.history))
        except OSError:
            pass
        return EXIT_DIVERGED
    except TransonicError as exc:
        log.error("solve failed: %s", exc)
        return EXIT_DIVERGED
    write_outputs(sol, out_dir)
    if spec.emit_plots:
        emit_plot_data(sol, out_dir)
    d = sol.diagnostics
    print(f"converged: m_e = {sol.m_e:.15g}, sweeps = {sum(len(s['diffs']) for s in sol.history['sweeps'])}, "
          f"mass defect = {d.mass_defect:.3g}, outputs in {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="transonic-cd", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    subs = ap.add_subparsers(dest="command", required=True)

    s = subs.add_parser("solve", help="solve and write outputs")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--out-dir")
    s.add_argument("--grid", metavar="NX,NY_SUB,NY_SUP")
    s.add_argument("--max-sweeps", type=int)
    s.add_argument("--tol", type=float, help="linearization sweep tolerance")
    s.add_argument("--emit-plots", action="store_true")
    s.set_defaults(func=cmd_solve)

    v = subs.add_parser("validate", help="run every input gate without solving")
    v.add_argument("--config", required=True, type=Path)
    v.set_defaults(func=cmd_validate)

    ver = subs.add_parser("version", help="print the package version")
    ver.set_defaults(func=lambda args: print(__version__) or EXIT_OK)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TransonicError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"error: {name or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
