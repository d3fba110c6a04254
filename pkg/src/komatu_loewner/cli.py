"""Command-line interface: ``komatu-loewner {kernel,solve,validate}``.

Exit codes: 0 ok, 1 configuration error, 2 numerical tolerance failure,
3 solver step-size underflow.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_UNDERFLOW = 0, 1, 2, 3

CSV_HELP = """\
output files
  kernel:   kernel.json          fitted model (schema_version 1)
            kstar_field.csv      columns x, y, kstar  (K*(x+iy, xi) on a grid)
            bound_report.json    residual, Koebe ratio, residue at infinity
  solve:    trajectory.json      full trajectory (schema_version 1)
            trajectory.csv       columns t, point, re, im, sheet, alive
            slits.csv            columns t, slit, y, x_left, x_right
            driver.csv           columns t, atom, xi, weight
            report.json          invariant report and halt status
  validate: validation.json      one entry per acceptance criterion

config file (JSON) sections
  domain  {"y": [...], "x_left": [...], "x_right": [...]}
  driver  {"kind": "dirac", "T": 1.0, "n_steps": 200, "params": {...}, "support": null}
  solve   {"T": 0.5, "reverse": false, "points": [[re, im] | {"re", "im", "sheet", "edge"}],
           "options": {SolveOptions fields}}
  output  {"dir": "out"}
"""


class ConfigError(ValueError):
    pass


def _read_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _domain(cfg: dict):
    from .geometry import GeometryError, SlitConfig

    d = cfg.get("domain", {"y": [], "x_left": [], "x_right": []})
    try:
        return SlitConfig.from_dict(d)
    except (GeometryError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid domain: {exc}") from exc


def _points(raw):
    from .geometry import SheetPoint

    out = []
    for p in raw:
        if isinstance(p, dict):
            out.append(SheetPoint.from_dict(p))
        elif isinstance(p, (list, tuple)) and len(p) == 2:
            out.append(SheetPoint(complex(float(p[0]), float(p[1]))))
        else:
            raise ConfigError(f"cannot parse tracked point {p!r}")
    return out


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_kernel(args) -> int:
    import numpy as np

    from . import jsonio
    from .kernel import (KernelError, ResidualExceeded, build_kernel, koebe_bound_check,
                         residue_at_infinity, sector_bound)

    s = _domain(_read_config(args.config))
    try:
        model = build_kernel(s, args.xi, args.degree, args.tol)
    except ResidualExceeded as exc:
        print(f"kernel fit failed: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except KernelError as exc:
        print(f"kernel fit failed: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    out = Path(args.out)
    _write(out, "kernel.json", jsonio.dumps(model.to_dict()))
    xs = np.linspace(args.xi - args.extent, args.xi + args.extent, args.nx)
    ys = np.linspace(args.extent / args.ny, 2 * args.extent, args.ny)
    X, Y = np.meshgrid(xs, ys)
    Z = X + 1j * Y
    inside = s.contains(Z) if s.n else np.ones(Z.shape, bool)
    K = np.full(Z.shape, np.nan)
    K[inside] = model.psi(Z[inside]).imag
    rows = ["x,y,kstar"] + [f"{x:.17g},{y:.17g},{'' if np.isnan(k) else format(k, '.17g')}"
                           for x, y, k in zip(X.ravel(), Y.ravel(), K.ravel())]
    _write(out, "kstar_field.csv", "\n".join(rows) + "\n")
    koebe = koebe_bound_check(model, args.samples, seed=args.seed)
    res, res_err = residue_at_infinity(model)
    report = {
        "schema_version": 1,
        "residual": model.residual, "tol": args.tol, "residual_ok": model.residual <= args.tol,
        "koebe_max_ratio": koebe.max_ratio, "koebe_ok": koebe.passed,
        "koebe_witness": {"z": koebe.witness[0], "xi": koebe.witness[1]},
        "residue": res, "residue_error": res_err,
        "residue_ok": abs(res + 1 / np.pi) <= max(1e-4, 3 * res_err),
        "sector_bound": sector_bound(model),
        "min_kstar_on_grid": float(np.nanmin(K)) if np.any(inside) else None,
    }
    report["passed"] = bool(report["residual_ok"] and report["koebe_ok"] and report["residue_ok"])
    _write(out, "bound_report.json", jsonio.dumps(report))
    print(f"kernel residual {model.residual:.3e}; Koebe ratio {koebe.max_ratio:.4f}; "
          f"report {'pass' if report['passed'] else 'FAIL'}")
    return EXIT_OK if report["passed"] else EXIT_TOLERANCE


def cmd_solve(args) -> int:
    from . import drivers, flow, jsonio
    from .kernel import KernelError

    cfg = _read_config(args.config)
    s = _domain(cfg)
    try:
        spec = drivers.DriverSpec.from_dict(cfg.get("driver", {"kind": "zero"}))
        driver = drivers.sample(spec)
    except (drivers.DriverError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid driver: {exc}") from exc
    solve = dict(cfg.get("solve", {}))
    T = float(args.T if args.T is not None else solve.get("T", driver.T))
    reverse = bool(args.reverse or solve.get("reverse", False))
    raw_points = solve.get("points", [])
    if args.point:
        raw_points = [[float(v) for v in p.split(",")] for p in args.point]
    points = _points(raw_points)
    try:
        opts = flow.SolveOptions(**solve.get("options", {}))
    except TypeError as exc:
        raise ConfigError(f"invalid solve options: {exc}") from exc
    if T > driver.T + 1e-12:
        raise ConfigError(f"T={T} exceeds the driver horizon {driver.T}")
    out = Path(args.out or cfg.get("output", {}).get("dir", "out"))
    try:
        if reverse:
            traj = flow.solve_reversed(s, driver, points, T, opts)
        else:
            traj = flow.solve_forward(s, driver, points, T, opts)
    except flow.MinStepUnderflow as exc:
        print(f"solver underflow: {exc}", file=sys.stderr)
        return EXIT_UNDERFLOW
    except (KernelError, flow.KernelLimit) as exc:
        print(f"kernel tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (ValueError, flow.FlowError) as exc:
        raise ConfigError(str(exc)) from exc
    _write(out, "trajectory.json", jsonio.dumps(traj.to_dict()))
    _write(out, "trajectory.csv", traj.to_csv())
    _write(out, "slits.csv", traj.slits_csv())
    _write(out, "driver.csv", driver.atoms_csv())
    report = {"schema_version": 1, "direction": traj.direction, "halt_reason": traj.halt_reason,
              "T_reached": traj.times[-1], "stats": traj.stats}
    if not reverse and args.report:
        rep = flow.evolution_family_report(traj, seed=args.seed)
        report["evolution_family"] = rep.to_dict()
    _write(out, "report.json", jsonio.dumps(report))
    if traj.absorption is not None:
        j, zeta = traj.absorption
        print(f"absorbed at zeta={zeta:.17g} (slit {j} reached y_floor={opts.y_floor})")
    elif traj.halt_reason != "completed":
        print(f"halted: {traj.halt_reason}", file=sys.stderr)
        return EXIT_TOLERANCE
    last = traj.tracked[-1]
    for k, z in enumerate(last):
        print(f"point {k}: t={traj.times[-1]:.17g} z=({z.real:.17g}, {z.imag:.17g}) "
              f"alive={bool(traj.alive[-1][k])}")
    if "evolution_family" in report and not report["evolution_family"]["passed"]:
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_validate(args) -> int:
    from . import jsonio
    from .validation import run_suite

    tolerances = {}
    for item in args.tolerance or []:
        key, _, val = item.partition("=")
        try:
            tolerances[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"bad --tolerance {item!r}") from exc
    only = [int(c) for c in args.criteria.split(",")] if args.criteria else None
    report = run_suite(args.level, args.seed, only, tolerances, echo=print)
    d = report.to_dict()
    if args.out:
        _write(Path(args.out), "validation.json", jsonio.dumps(d))
    else:
        sys.stdout.write(jsonio.dumps(d))
    print("validation " + ("passed" if report.passed else "FAILED"))
    return EXIT_OK if report.passed else EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="komatu-loewner", description="Komatu-Loewner flows on parallel slit half-planes.",
        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--threads", type=int, default=None,
                   help="cap the number of BLAS/LAPACK worker threads")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="fit the BMD Poisson kernel for one pole")
    k.add_argument("config", help="JSON config with a 'domain' section")
    k.add_argument("--xi", type=float, default=0.0)
    k.add_argument("--degree", type=int, default=24)
    k.add_argument("--tol", type=float, default=1e-8)
    k.add_argument("--samples", type=int, default=10_000, help="Koebe check samples")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--extent", type=float, default=3.0, help="half-width of the K* field grid")
    k.add_argument("--nx", type=int, default=61)
    k.add_argument("--ny", type=int, default=31)
    k.add_argument("--out", default="out")
    k.set_defaults(func=cmd_kernel)

    s = sub.add_parser("solve", help="integrate a forward or reversed flow")
    s.add_argument("config", help="JSON config with domain, driver, solve, output sections")
    s.add_argument("--T", type=float, default=None)
    s.add_argument("--reverse", action="store_true", help="mapping-out (reversed) flow")
    s.add_argument("--point", action="append", metavar="RE,IM",
                   help="tracked base point (repeatable; overrides the config)")
    s.add_argument("--no-report", dest="report", action="store_false",
                   help="skip the evolution-family report")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", help="run the acceptance suite")
    v.add_argument("--level", choices=["quick", "full"], default="quick")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--criteria", default=None, help="comma-separated criterion numbers")
    v.add_argument("--tolerance", action="append", metavar="KEY=VALUE",
                   help="override a tolerance (test hook)")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    limiter = None
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        import os

        from threadpoolctl import threadpool_limits
        # a cap, never an increase: oversubscribing cores makes BLAS spin
        limiter = threadpool_limits(limits=min(args.threads, os.cpu_count() or 1))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
