"""Command-line entry point ``fde-lab``."""

from __future__ import annotations

import argparse
import csv
import io
import random
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import harness
from .constants import all_constants
from .core import EQUATION_FORMS, WITH_INVERSE_M, FdeParams
from .solver import SolverError, write_trajectory_csv


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="scenario config file (default: bundled canonical-suite)")
    parser.add_argument("--out", help=f"output directory (overrides ${harness.OUT_ENV})")
    parser.add_argument("--grid", type=int, help="override n_cells for every scenario")
    parser.add_argument("--seed", type=int, default=0, help="seed for any randomized step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fde-lab", description="Fast diffusion estimate lab.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one scenario and write its trajectory CSV")
    _common(p)
    p.add_argument("--scenario", help="scenario id (default: first in the config)")

    p = sub.add_parser("constants", help="print the explicit constants for (m, d)")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.5, help="outer/inner radius ratio R0/(2R)")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--equation-form", choices=EQUATION_FORMS, default=WITH_INVERSE_M)
    p.add_argument("--format", choices=("text", "csv"), default="text")

    p = sub.add_parser("check", help="run scenarios and print the summary table")
    _common(p)
    p.add_argument("--scenario", action="append", help="restrict to these scenario ids")

    p = sub.add_parser("suite", help="run every scenario and write csv, table and plot data")
    _common(p)
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("export", help="re-emit a report CSV in another format")
    p.add_argument("reports", help="path to a reports.csv written by 'suite'")
    p.add_argument("--format", choices=("table", "plotdata", "csv"), default="table")
    p.add_argument("--out", help=f"output directory (overrides ${harness.OUT_ENV})")
    return parser


def _load(args) -> harness.SuiteConfig:
    path = args.config or harness.bundled_config_path()
    return harness.load_config(path, args.grid)


def _select(suite: harness.SuiteConfig, ids: Optional[Sequence[str]]) -> harness.SuiteConfig:
    if not ids:
        return suite
    known = {sc.id: sc for sc in suite.scenarios}
    missing = [i for i in ids if i not in known]
    if missing:
        raise harness.ConfigError(f"unknown scenario(s): {', '.join(missing)}")
    return harness.SuiteConfig(suite.name, suite.output, suite.workers,
                               tuple(known[i] for i in ids), suite.text_hash, suite.base_dir)


def _cmd_solve(args) -> int:
    suite = _select(_load(args), [args.scenario] if args.scenario else None)
    sc = suite.scenarios[0]
    if sc.data == "vss-sample":
        raise harness.ConfigError(f"scenario {sc.id!r} has no solver run")
    u0 = harness.initial_data(sc, suite.base_dir)
    from .solver import solve_radial_dirichlet

    traj = solve_radial_dirichlet(sc.params, u0, sc.geometry.domain, sc.solver)
    out = harness.resolve_output_dir(args.out, sc.output)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{sc.id}.trajectory.csv"
    write_trajectory_csv(traj, path)
    ext = traj.extinction
    print(f"{sc.id}: {len(traj.times)} snapshots, t_end = {traj.times[-1]:.6g}")
    if ext is not None:
        print(f"extinction time ~ {ext.T_est:.6g} (fit quality {ext.fit_quality:.2e})")
    print(f"wrote {path}")
    return 0


def _cmd_constants(args) -> int:
    params = FdeParams(args.m, args.d, args.equation_form)
    cs = all_constants(params, p=args.p, R=args.R, lam=args.lam, epsilon=args.epsilon)
    rows = cs.rows()
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("name", "value", "formula_tag"))
        for name, value, tag in rows:
            w.writerow((name, repr(value), tag))
        sys.stdout.write(buf.getvalue())
    else:
        width = max(len(r[0]) for r in rows)
        for name, value, tag in rows:
            print(f"{name.ljust(width)}  {value:.10g}  [{tag}]")
    return 0


def _run(args, ids=None) -> tuple[harness.SuiteConfig, harness.ReportBundle]:
    suite = _select(_load(args), ids)
    return suite, harness.run_scenarios(suite)


def _report(bundle: harness.ReportBundle) -> int:
    c = bundle.counts
    print(f"checked {c['checked']}: held {c['held']}, failed {c['failed']}, skipped {c['skipped']}")
    for sk in bundle.skipped:
        print(f"skipped {sk.scenario_id}/{sk.check}: {sk.reason}")
    return 0 if bundle.all_held else 1


def _cmd_check(args) -> int:
    _, bundle = _run(args, args.scenario)
    if bundle.reports:
        sys.stdout.write(harness.table_text(harness.report_rows(bundle)))
    return _report(bundle)


def _cmd_suite(args) -> int:
    suite, bundle = _run(args)
    out = harness.resolve_output_dir(args.out, suite.output)
    for fmt in ("csv", "table", "plotdata"):
        harness.emit(bundle, fmt, out, figures=not args.no_figures)
    print(f"wrote reports to {out}")
    return _report(bundle)


def _cmd_export(args) -> int:
    rows = harness.read_reports_csv(args.reports)
    out = harness.resolve_output_dir(args.out, str(Path(args.reports).parent))
    written = harness.emit_rows(rows, args.format, out)
    for path in written:
        print(path)
    return 0


COMMANDS = {
    "solve": _cmd_solve,
    "constants": _cmd_constants,
    "check": _cmd_check,
    "suite": _cmd_suite,
    "export": _cmd_export,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    seed = getattr(args, "seed", 0)
    random.seed(seed)
    np.random.seed(seed)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, SolverError, OSError) as exc:
        print(f"fde-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
