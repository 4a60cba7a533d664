"""Command line interface: ``mps simulate|sweep|audit|gen-ic|export-plot``.

Exit codes: 0 success, 1 audit failure, 2 configuration error, 3 blow-up.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import runner
from .config import ConfigError, load_config
from .integrator import LedgerSchemaError
from .snapshot import SnapshotFormatError
from .spectral import set_threads

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3

log = logging.getLogger("micropolar")


def _load(args):
    cfg = load_config(args.config)
    if args.seed_override is not None:
        cfg = runner.apply_seed_override(cfg, args.seed_override)
    return cfg, Path(args.config).resolve().parent


def _print_report(report) -> None:
    for c in report.checks:
        val = "-" if c.value is None else f"{c.value:.6g}"
        print(f"  {c.status:12s} {c.name:30s} {val:>14s}  {c.detail}")


def cmd_simulate(args) -> int:
    cfg, base = _load(args)
    res = runner.run(cfg, args.out, base)
    est = res.estimate
    if est.T_E is None:
        print("T_E: not admissible (small-data condition fails)")
    else:
        flag = "yes" if res.t_end <= est.T_E else "no"
        print(f"T_E = {est.T_E:.10g} ({est.branch}); t_end = {res.t_end:.10g}; t_end <= T_E: {flag}")
    if res.blew_up:
        print(f"blow-up: {res.failure}", file=sys.stderr)
    if res.report is not None:
        _print_report(res.report)
    return res.exit_code


def cmd_sweep(args) -> int:
    cfg, base = _load(args)
    values = [float(v) for v in args.values]
    res = runner.sweep(cfg, args.axis, values, args.out, base, runner.resolve_threads(args.threads))
    print(res.to_csv(), end="")
    return res.exit_code


def cmd_audit(args) -> int:
    cfg, base = _load(args)
    report = runner.audit_offline(cfg, args.ledger, args.out, base)
    _print_report(report)
    return EXIT_OK if report.passed else EXIT_AUDIT


def cmd_gen_ic(args) -> int:
    cfg, base = _load(args)
    path = runner.generate_ic(cfg, args.out, base)
    print(path)
    return EXIT_OK


def cmd_export_plot(args) -> int:
    path = runner.export_plot(args.ledger, args.out)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mps", description="Mollified micropolar pseudo-spectral solver and auditor")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="run configuration (JSON)")
            p.add_argument("--seed-override", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
        p.add_argument("--threads", type=int, default=None, help="FFT / sweep workers (env MPS_THREADS)")

    p = sub.add_parser("simulate", help="run one configuration")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    common(p)
    p.add_argument("--axis", required=True, choices=runner.SWEEP_AXES)
    p.add_argument("values", nargs="+")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("audit", help="re-run audits from a ledger")
    common(p)
    p.add_argument("--ledger", required=True)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("gen-ic", help="write initial-condition snapshot")
    common(p)
    p.set_defaults(func=cmd_gen_ic)

    p = sub.add_parser("export-plot", help="ledger to whitespace-separated columns")
    common(p, config=False)
    p.add_argument("--ledger", required=True)
    p.set_defaults(func=cmd_export_plot)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    threads = runner.resolve_threads(getattr(args, "threads", None))
    try:
        set_threads(threads)
        return args.func(args)
    except (ConfigError, SnapshotFormatError, LedgerSchemaError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
