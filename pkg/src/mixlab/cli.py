"""Command-line front end: verify, run, and report subcommands.

Exit codes: 0 success, 1 verification failure, 2 config parse or
validation error, 3 infeasible construction or substitution, 4 report
requested on an incomplete run directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__, reporting, verify
from .constructions import ConstructionError
from .harness import run_experiment
from .runconfig import ConfigError, config_hash, load_config, make_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixlab",
        description="Aggregation-rule risk experiments with exact walk oracles.")
    parser.add_argument("--version", action="version", version=f"mixlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the self-check suites")
    p.add_argument("suite", nargs="?", default="all",
                   choices=("lemmas", "losses", "aggregation", "all"))

    p = sub.add_parser("run", help="execute an experiment config")
    p.add_argument("config", help="path to an [experiment] key=value or JSON file")
    p.add_argument("--out", default="mixlab-out", help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (overrides config; MIXLAB_SEED is the fallback)")
    p.add_argument("--replicates", type=int, default=None, help="override replicate count")
    p.add_argument("--workers", type=int, default=None, help="override worker count")

    p = sub.add_parser("report", help="write plot-data files for a finished run")
    p.add_argument("out_dir", help="directory written by `mixlab run`")
    return parser


def _cmd_verify(args) -> int:
    report = verify.run_suite(args.suite)
    print(verify.format_report(report))
    return 0 if report.passed else 1


def _resolve_seed(args, fields) -> int | None:
    """Precedence: --seed flag, then config file, then MIXLAB_SEED."""
    if args.seed is not None:
        return args.seed
    if "seed" in fields:
        return fields["seed"]
    env = os.environ.get("MIXLAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"MIXLAB_SEED must be an integer, got {env!r}") from None
    return None


def _cmd_run(args) -> int:
    try:
        fields = load_config(args.config)
        seed = _resolve_seed(args, fields)
        if seed is not None:
            fields["seed"] = seed
        if args.replicates is not None:
            fields["replicates"] = args.replicates
        if args.workers is not None:
            fields["workers"] = args.workers
        config = make_config(fields)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        records, summary = run_experiment(config)
    except ConstructionError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    manifest = reporting.make_manifest(summary, config_hash(config), config.seed)
    paths = reporting.write_run(Path(args.out), records, summary, manifest)
    for path in paths:
        print(path)
    return 0


def _cmd_report(args) -> int:
    try:
        paths = reporting.write_report(Path(args.out_dir))
    except reporting.IncompleteRunError as exc:
        print(f"incomplete run: {exc}", file=sys.stderr)
        return 4
    for path in paths:
        print(path)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "verify":
        return _cmd_verify(args)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
