"""Command-line entry point: ``prising <subcommand> --config FILE --out CSV``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 audit
failure (``audit`` only).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import (MSE_FIELDS, REAL_FIELDS, RESULT_FIELDS, SWEEP_SUMMARY_FIELDS,
                          ConfigError, DataError, load_config, run_audits, run_real_data,
                          run_study_beta_sweep, run_study_mse_vs_density,
                          run_study_mse_vs_n, summarize_sweep, write_csv)
from .privacy_audit import format_report, write_audit_csv

log = logging.getLogger("prising")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_AUDIT = 0, 1, 2, 3


def _sidecar(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix + out.suffix)


def _beta_sweep(cfg, args) -> int:
    rows = run_study_beta_sweep(cfg, args.threads)
    with open(args.out, "w", newline="") as fh:
        write_csv(rows, RESULT_FIELDS, fh)
    with open(_sidecar(args.out, ".summary"), "w", newline="") as fh:
        write_csv(summarize_sweep(rows), SWEEP_SUMMARY_FIELDS, fh)
    return EXIT_OK


def _mse(runner):
    def run(cfg, args) -> int:
        table = runner(cfg, args.threads)
        with open(args.out, "w", newline="") as fh:
            write_csv(table, MSE_FIELDS, fh)
        return EXIT_OK
    return run


def _real_data(cfg, args) -> int:
    res = run_real_data(cfg)
    with open(args.out, "w", newline="") as fh:
        write_csv(res.rows, REAL_FIELDS, fh)
    print(res.summary())
    return EXIT_OK


def _audit(cfg, args) -> int:
    reports = run_audits(cfg)
    with open(args.out, "w", newline="") as fh:
        write_audit_csv(reports, fh)
    for r in reports:
        print(format_report(r))
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} audits passed")
    return EXIT_AUDIT if failed else EXIT_OK


COMMANDS = {
    "beta-sweep": (_beta_sweep, "private vs non-private estimates over a beta grid"),
    "mse-n": (_mse(run_study_mse_vs_n), "MSE against the number of nodes"),
    "mse-density": (_mse(run_study_mse_vs_density), "MSE against the edge-density exponent"),
    "real-data": (_real_data, "cost of privacy on an observed network"),
    "audit": (_audit, "check the privacy bounds on random instances"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prising", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None,
                       help="overrides the seed in the config file")
        p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
