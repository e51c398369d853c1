"""Command-line entry point: ``klshell run`` and ``klshell sweep``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import DEFAULT_CPS, SweepConfig, convergence_sweep, load_surface, run_case, supported, write_reports
from .errors import KLShellError
from .linsolve import write_matrix_market
from .postprocess import export_vtk, write_probe_csv

CASES = ("scordelis-lo", "hemisphere", "pinched-cylinder", "strip")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="klshell", description="Mixed isogeometric Kirchhoff-Love shell benchmarks")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one benchmark configuration")
    run.add_argument("--case", required=True, choices=CASES)
    run.add_argument("--formulation", default="m", choices=("m", "mn"))
    run.add_argument("--degree", type=int, default=2)
    run.add_argument("--cps", type=int, default=None, help="control points per patch edge")
    run.add_argument("--slenderness", type=float, default=None, help="R/t for the strip case")
    run.add_argument("--patches", type=int, default=None, choices=(1, 4))
    run.add_argument("--geometry", type=Path, default=None, help="patch JSON replacing the case geometry")
    run.add_argument("--out", type=Path, default=None, help="JSON report path")
    run.add_argument("--vtk", type=Path, default=None)
    run.add_argument("--dump-system", type=Path, default=None, help="Matrix Market file for the assembled matrix")

    sw = sub.add_parser("sweep", help="run a convergence sweep from a JSON config")
    sw.add_argument("--config", type=Path, required=True)
    sw.add_argument("--out", type=Path, default=None, help="JSON report path (default: print)")
    sw.add_argument("--csv", type=Path, default=None)
    return ap


def _default_patches(case: str) -> int:
    return 4 if case in ("hemisphere", "pinched-cylinder") else 1


def _cmd_run(args) -> int:
    patches = args.patches or _default_patches(args.case)
    supported(args.case, patches)
    cps = args.cps
    if cps is None and args.case != "strip":
        cps = DEFAULT_CPS[-1]
    surface = load_surface(args.geometry) if args.geometry else None
    rep, fields = run_case(args.case, args.formulation, args.degree, cps, args.slenderness, patches, keep=True, surface=surface)
    if args.vtk:
        export_vtk(fields, args.vtk)
    if args.dump_system:
        write_matrix_market(args.dump_system, fields.system.K, comment=f"{rep.case} {rep.formulation} p={rep.degree}")
    text = json.dumps(rep.to_dict(), indent=2)
    if args.out:
        args.out.write_text(text)
    print(text)
    return 0


def _cmd_sweep(args) -> int:
    cfg = SweepConfig.from_json(args.config)
    supported(cfg.case, cfg.patches)

    def progress(r):
        axis = f"cps={r.cps}" if r.cps is not None else f"R/t={r.slenderness:g}"
        print(f"{r.formulation} p={r.degree} {axis}: {r.probe:.6g} (rel err {r.rel_error:.2%})", file=sys.stderr)

    reports = convergence_sweep(cfg, progress)
    if args.out:
        write_reports(args.out, reports)
    else:
        print(json.dumps([r.to_dict() for r in reports], indent=2))
    if args.csv:
        rows = []
        for r in reports:
            d = r.to_dict()
            d.pop("dofs")
            rows.append(d)
        write_probe_csv(args.csv, rows)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _cmd_run(args) if args.command == "run" else _cmd_sweep(args)
    except (KLShellError, OSError, ValueError) as exc:
        print(f"klshell: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
