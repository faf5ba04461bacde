"""Command line entry point: ``dbr run --config <path>``."""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError
from .report import ALL_COMMANDS, ExperimentConfig, export, run, seed_from_env


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dbr", description="Verification reports for canonical functional models.")
    sub = parser.add_subparsers(dest="action", required=True)
    p = sub.add_parser("run", help="run the checks listed in a configuration file")
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--command", action="append", choices=ALL_COMMANDS, dest="commands",
                   help="command to run (repeatable); overrides the configuration")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = seed_from_env(ExperimentConfig.load(args.config))
        report = run(cfg, args.commands)
    except (ConfigError, OSError) as exc:
        print(f"dbr: {exc}", file=sys.stderr)
        return 2
    if args.out:
        export(report, args.out, args.format)
    else:
        sys.stdout.write(report.to_json() + "\n" if args.format == "json" else report.to_csv())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
