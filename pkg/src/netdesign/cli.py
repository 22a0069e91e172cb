"""Command-line entry point.

Subcommands cover design comparison, frequentist risk, compression scores,
entropy bounds, staged optimization, sufficiency checks and run summaries.
Every experiment is driven by a YAML config file; a few flags override the
file in place.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, parse_config
from .runner import run_experiment, summarize

_EXPERIMENT_COMMANDS = {
    "compare": "compare",
    "risk": "risk",
    "compress-score": "compress",
    "entropy": "entropy",
    "sequential": "sequential",
    "suffcheck": "suffcheck",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment YAML file")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--replicates", type=int, default=None, help="override K")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--threads", type=int, default=None, help="worker count")
    p.add_argument("--exact", action="store_true", help="force the exact oracle mode")
    p.add_argument(
        "--extended", action="store_true",
        help="allow long (hours-scale) runs; no effect on small configs",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netdesign",
        description="Simulate and rank network sampling designs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in _EXPERIMENT_COMMANDS:
        p = sub.add_parser(cmd, help=f"run a {cmd} experiment")
        _add_common(p)
    ps = sub.add_parser("summarize", help="rank designs from stored runs")
    ps.add_argument("--store", required=True, help="output directory with runs.csv")
    ps.add_argument("ids", nargs="*", help="run ids to include (default: all)")
    ps.add_argument("--out", default=None, help="write the ranking CSV here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "summarize":
        try:
            text, csv_lines = summarize(args.store, args.ids or None)
        except (FileNotFoundError, KeyError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 1
        print(text)
        if args.out:
            Path(args.out).write_text("\n".join(csv_lines) + "\n")
        return 0

    kind = _EXPERIMENT_COMMANDS[args.command]
    overrides = {
        "experiment": kind,
        "seed": args.seed,
        "replicates": args.replicates,
        "out_dir": args.out,
        "threads": args.threads,
    }
    if args.exact:
        overrides["exact"] = True
    try:
        config = parse_config(args.config, overrides)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    result = run_experiment(config)
    print(f"experiment {config.kind} done; outputs under {config.out_dir}")
    if hasattr(result, "rows"):
        for line in result.csv_lines():
            print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
