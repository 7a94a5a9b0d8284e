"""Command line entry point: ``flexmatch simulate|sweep|table|oracle-check``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import ConfigValidationError, load_config, preset_names
from .harness import run_experiment

DEFAULT_CONFIG = {
    "simulate": "table1-s1",
    "sweep": "sweep-m1",
    "table": "table1",
    "oracle-check": "oracle-check",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexmatch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DEFAULT_CONFIG:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument(
            "--config",
            default=DEFAULT_CONFIG[name],
            help=f"JSON config file or preset name (default: {DEFAULT_CONFIG[name]})",
        )
        p.add_argument("--seed", type=int, help="top-level seed (default: config, or $FLEXMATCH_SEED)")
        p.add_argument("--trials", type=int, help="trials per estimate (default: config, or $FLEXMATCH_TRIALS)")
        p.add_argument("--out", help="output directory (default: config, or ./results)")
        p.add_argument("--policies", help="comma-separated policy names, e.g. m1-ns3,edf,mh")
        p.add_argument("--workers", type=int, help="worker processes for trials")
    sub.add_parser("presets", help="list bundled presets")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.command == "presets":
        print("\n".join(preset_names()))
        return 0
    policies = [p.strip() for p in args.policies.split(",")] if args.policies else None
    try:
        spec = load_config(
            args.config, seed=args.seed, trials=args.trials, policies=policies, out=args.out, mode=args.command
        )
    except ConfigValidationError as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.workers:
        spec = replace(spec, workers=args.workers)
    try:
        report = run_experiment(spec)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
