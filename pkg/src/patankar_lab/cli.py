"""Command-line front end.

    patankar-lab table mpdec-gl 1..9
    patankar-lab sweep mprk22 --range 0.5:5:0.05
    patankar-lab osc-bound --scheme mpdec:3:eq
    patankar-lab lyap-bound --scheme sspmprk43
    patankar-lab stability-eval --scheme mpdec:2:eq --z -1 --mode recurrence
    patankar-lab integrate --scheme mprk22:1.0 --theta 0.3 --eps 0.01 --dt 0.5 --steps 20
    patankar-lab theta-dump 3 eq

CSV goes to ``--out`` (default stdout). With ``--out`` a run manifest is
written next to it as ``<out>.manifest.json``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .oscillation import BISECTION_TOL, CROSSING_TOL, DT_MAX, EXCLUSION_BAND, MULTISTEP_STEPS
from .pds import TestProblem
from .reports import (
    SWEEP_COLUMNS,
    TABLE_COLUMNS,
    BoundSettings,
    bound_report,
    format_number,
    parse_range,
    sweep_rows,
    table_rows,
    theta_csv,
    to_csv,
    trajectory_csv,
)
from .schemes import SchemeConfig, SchemeError, StepContext, integrate
from .stability import NotInCatalogError, StabilityEvaluator, lyapunov_dt0
from .subtimesteps import theta_matrix


@dataclass
class RunManifest:
    command: list
    schemes: list = field(default_factory=list)
    grids: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    scan_limit: float | None = None
    wall_clock_s: float = 0.0
    started_at: str = ""
    outputs: list = field(default_factory=list)
    version: str = __version__


def _emit(text: str, out: str | None, manifest: RunManifest | None = None, started: float | None = None):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", newline="\n") as fh:
        fh.write(text)
    if manifest is not None:
        manifest.outputs = [out]
        manifest.wall_clock_s = time.time() - started
        with open(out + ".manifest.json", "w") as fh:
            json.dump(asdict(manifest), fh, indent=2, default=str)
            fh.write("\n")


def _settings(args) -> BoundSettings:
    theta_grid = tuple(parse_range(args.theta_grid)) if args.theta_grid else None
    eps_grid = None
    if args.eps_mode == "list":
        if not args.eps_grid:
            raise SystemExit("--eps-mode list needs --eps-grid v1,v2,...")
        eps_grid = tuple(float(v) for v in args.eps_grid.split(","))
    return BoundSettings(
        theta_grid=theta_grid,
        eps_grid=eps_grid,
        n_steps=args.steps,
        dt_max=args.dt_max,
        tol=args.tol,
        scan_limit=args.scan_limit,
        lyapunov_mode=args.mode,
        multistep_steps=args.multistep,
        workers=args.workers,
    )


def _manifest(args, schemes, settings: BoundSettings | None = None) -> RunManifest:
    m = RunManifest(
        command=sys.argv[:] if sys.argv else [],
        schemes=list(schemes),
        started_at=datetime.now(timezone.utc).isoformat(),
    )
    if settings is not None:
        m.grids = {
            "theta": list(settings.theta_grid) if settings.theta_grid else "default",
            "eps": list(settings.eps_grid) if settings.eps_grid else "default",
            "n_steps": settings.n_steps,
            "multistep_steps": settings.multistep_steps,
        }
        m.tolerances = {
            "bisection": settings.tol,
            "crossing": CROSSING_TOL,
            "exclusion_band": EXCLUSION_BAND,
            "dt_max": settings.dt_max,
        }
        m.scan_limit = settings.scan_limit
    return m


def cmd_table(args):
    started = time.time()
    settings = _settings(args)
    items = ",".join(args.items) if args.items and args.family != "other" else (args.items or None)
    rows = table_rows(args.family, items, settings)
    _emit(to_csv(TABLE_COLUMNS, rows), args.out, _manifest(args, [r.scheme for r in rows], settings), started)


def cmd_sweep(args):
    started = time.time()
    settings = _settings(args)
    rows = sweep_rows(args.family, parse_range(args.range), settings)
    _emit(to_csv(SWEEP_COLUMNS, rows), args.out, _manifest(args, [args.family], settings), started)


def cmd_osc_bound(args):
    started = time.time()
    settings = _settings(args)
    scheme = SchemeConfig.parse(args.scheme)
    report = bound_report(scheme, settings)
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    _emit(text, args.out, _manifest(args, [scheme.identifier], settings), started)


def cmd_lyap_bound(args):
    scheme = SchemeConfig.parse(args.scheme)
    bound = lyapunov_dt0(scheme, args.mode, scan_limit=args.scan_limit)
    if bound.status == "pole":
        print(f"pole encountered near dt={bound.pole_at!r}", file=sys.stderr)
        return 1
    _emit(format_number(bound.dt0) + "\n", args.out)
    return 0


def cmd_stability_eval(args):
    scheme = SchemeConfig.parse(args.scheme)
    evaluator = StabilityEvaluator(scheme, args.mode, theta=args.theta)
    value = float(np.real(evaluator(args.z)))
    _emit(f"{value:.15g}\n", args.out)


def cmd_integrate(args):
    scheme = SchemeConfig.parse(args.scheme)
    problem = TestProblem(args.theta)
    ctx = StepContext(problem.as_pds(), args.dt)
    traj = integrate(scheme, ctx, np.array([1.0 - args.eps, args.eps]), args.steps)
    _emit(trajectory_csv(traj, args.dt), args.out)


def cmd_theta_dump(args):
    _emit(theta_csv(theta_matrix(args.p, args.family)), args.out)


def _bound_options(p: argparse.ArgumentParser):
    p.add_argument("--theta-grid", help="theta values as a:b:step (default: built-in grid)")
    p.add_argument("--eps-mode", choices=("default", "list"), default="default")
    p.add_argument("--eps-grid", help="comma-separated eps values for --eps-mode list")
    p.add_argument("--steps", type=int, default=1, help="steps per overshoot probe (1 = single-step test)")
    p.add_argument("--multistep", type=int, nargs="?", const=MULTISTEP_STEPS, default=None,
                   help=f"also report the bound for N-step probes (default N={MULTISTEP_STEPS})")
    p.add_argument("--dt-max", type=float, default=DT_MAX)
    p.add_argument("--tol", type=float, default=BISECTION_TOL, help="bisection tolerance on dt")
    p.add_argument("--scan-limit", type=float, default=1e6)
    p.add_argument("--mode", choices=("closed", "recurrence", "jacobian"), default=None,
                   help="stability function route for the Lyapunov column")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: PATANKAR_LAB_THREADS or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patankar-lab", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("table", parents=[out], help="numerical and Lyapunov bounds per scheme")
    p.add_argument("family", choices=("mpdec-eq", "mpdec-gl", "other"))
    p.add_argument("items", nargs="*", help="orders such as 1..9 (mpdec) or scheme ids (other)")
    _bound_options(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("sweep", parents=[out], help="bounds over a scheme parameter")
    p.add_argument("family", choices=("mprk22", "mprk43g"))
    p.add_argument("--range", default="0.5:5:0.05", help="a:b:step (default 0.5:5:0.05)")
    _bound_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("osc-bound", parents=[out], help="bound report as JSON")
    p.add_argument("--scheme", required=True)
    _bound_options(p)
    p.set_defaults(func=cmd_osc_bound)

    p = sub.add_parser("lyap-bound", parents=[out], help="first zero of R(-dt)")
    p.add_argument("--scheme", required=True)
    p.add_argument("--mode", choices=("closed", "recurrence", "jacobian"), default=None)
    p.add_argument("--scan-limit", type=float, default=1e6)
    p.set_defaults(func=cmd_lyap_bound)

    p = sub.add_parser("stability-eval", parents=[out], help="evaluate R(z)")
    p.add_argument("--scheme", required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--mode", choices=("closed", "recurrence", "jacobian"), default="closed")
    p.add_argument("--theta", type=float, default=0.3, help="test-problem theta for jacobian mode")
    p.set_defaults(func=cmd_stability_eval)

    p = sub.add_parser("integrate", parents=[out], help="trajectory on the linear test problem")
    p.add_argument("--scheme", required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--eps", type=float, required=True, help="initial state (1 - eps, eps)")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("theta-dump", parents=[out], help="MPDeC coefficient matrix as CSV")
    p.add_argument("p", type=int)
    p.add_argument("family", choices=("eq", "gl"))
    p.set_defaults(func=cmd_theta_dump)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = args.func(args)
    except (ValueError, NotInCatalogError, SchemeError) as exc:
        parser.exit(2, f"{parser.prog} {args.command}: error: {exc}\n")
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
