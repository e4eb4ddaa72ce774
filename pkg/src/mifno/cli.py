"""Command-line entry point: ``mifno run | estimate-only | render``.

Exit codes: 0 success, 2 partial expansion (some increments failed),
1 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from mifno.config import SCOPES, SOLVERS, VQE_BACKENDS, RunConfig, load_config
from mifno.errors import MifnoError
from mifno.estimate import DEFAULT_LADDER, estimate_only, spectrum_from_store
from mifno.integrals import read_fcidump
from mifno.pipeline import execute
from mifno.report import build_report, from_json, render

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2


def run(cfg: RunConfig):
    """Execute a configured run and return its report."""
    return build_report(execute(cfg))


def _run_config(args) -> RunConfig:
    overrides = dict(
        fcidump_path=args.fcidump, order=args.order, fno_occupancy=args.fno_occupancy,
        fno_keep=args.fno_keep, fno_scope=args.fno_scope, solver=args.solver,
        screen_threshold=args.screen, workers=args.workers, ledger_path=args.ledger,
        report_path=args.report, frozen_core=args.frozen_core, vqe_backend=args.vqe_backend,
        resume=True if args.resume else None,
    )
    if args.config:
        return load_config(args.config, **overrides)
    if not args.fcidump:
        raise MifnoError("give an FCIDUMP or a --config file")
    return RunConfig(**{k: v for k, v in overrides.items() if v is not None})


def cmd_run(args) -> int:
    cfg = _run_config(args)
    report = run(cfg)
    text = render(report, args.format)
    if cfg.report_path:
        Path(cfg.report_path).write_text(render(report, "json"))
    sys.stdout.write(text)
    return EXIT_OK if report.status == "complete" else EXIT_PARTIAL


def _parse_counts(items) -> dict:
    out = {}
    for item in items or []:
        label, _, value = item.partition("=")
        if not value:
            raise MifnoError(f"expected LABEL=COUNT, got {item!r}")
        out[label] = int(value)
    return out


def cmd_estimate(args) -> int:
    eig = None
    n_occ = args.n_occ
    if args.fcidump:
        store = read_fcidump(args.fcidump)
        eig = spectrum_from_store(store, args.frozen_core)
        n_occ = n_occ or store.n_occupied - args.frozen_core
    elif args.eigenvalues:
        eig = [float(x) for x in Path(args.eigenvalues).read_text().split()]
    if not n_occ:
        raise MifnoError("--n-occ is required without an FCIDUMP")
    thresholds = tuple(args.thresholds) if args.thresholds else DEFAULT_LADDER
    table = estimate_only(n_occ, args.order, eigenvalues=eig, n_virtual=_parse_counts(args.n_virt),
                          thresholds=thresholds)
    if args.format == "json":
        sys.stdout.write(json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(table.render())
    return EXIT_OK


def cmd_render(args) -> int:
    report = from_json(Path(args.report_file).read_text())
    sys.stdout.write(render(report, args.format))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors exit with 1; exit code 2 is reserved for partial runs
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mifno", description="Increment expansion with frozen natural orbitals")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve all increments and report")
    r.add_argument("fcidump", nargs="?")
    r.add_argument("--config")
    r.add_argument("--order", type=int)
    fno = r.add_mutually_exclusive_group()
    fno.add_argument("--fno-occupancy", type=float)
    fno.add_argument("--fno-keep", type=int)
    r.add_argument("--fno-scope", choices=SCOPES)
    r.add_argument("--solver", choices=SOLVERS)
    r.add_argument("--vqe-backend", choices=VQE_BACKENDS)
    r.add_argument("--screen", type=float, help="energy screening threshold (hartree)")
    r.add_argument("--workers", type=int)
    r.add_argument("--frozen-core", type=int)
    r.add_argument("--ledger")
    r.add_argument("--resume", action="store_true")
    r.add_argument("--report", help="also write the JSON report here")
    r.add_argument("--format", choices=("json", "table"), default="table")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("estimate-only", help="qubit counts over occupancy thresholds")
    e.add_argument("fcidump", nargs="?")
    e.add_argument("--n-occ", type=int)
    e.add_argument("--order", type=int, default=3)
    e.add_argument("--eigenvalues", help="file of FNO occupations")
    e.add_argument("--n-virt", action="append", metavar="LABEL=COUNT",
                   help="explicit kept-virtual count; LABEL 'full' gives the untruncated total")
    e.add_argument("--thresholds", type=float, nargs="+")
    e.add_argument("--frozen-core", type=int, default=0)
    e.add_argument("--format", choices=("json", "table"), default="table")
    e.set_defaults(func=cmd_estimate)

    d = sub.add_parser("render", help="re-render a JSON report")
    d.add_argument("report_file")
    d.add_argument("--format", choices=("json", "table"), default="table")
    d.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MifnoError, OSError, ValueError) as exc:
        print(f"mifno: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
