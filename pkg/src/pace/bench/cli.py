"""Command-line entry point for the benchmark harness.

Usage::

    pace-bench run <scenario> [--config FILE] [--out FILE]
                   [--repetitions N] [--virtual-clock]

Scenario names: pending-tasks, poll-overhead, thread-contention, task-class,
request-events, allreduce.  Output is CSV with one header row; latencies are
microseconds with three decimal places.  Rows for a fixed config are emitted
in a deterministic schema and order.
"""

from __future__ import annotations

import argparse
import csv
import sys
from typing import Optional, Sequence

from .config import BenchConfig, ConfigError, load_config
from .scenarios import SCENARIOS, ScenarioResult, run_scenario

EXIT_OK = 0
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pace-bench",
        description="Desk-scale progress-latency benchmarks with CSV output")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario and write CSV")
    run.add_argument("scenario", help="scenario name (see --list)")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--out", default="-",
                     help="output CSV path (default: stdout)")
    run.add_argument("--repetitions", type=int, default=None,
                     help="override measured repetitions per sweep point")
    run.add_argument("--virtual-clock", action="store_true",
                     help="deterministic virtual time instead of the wall "
                          "clock (single-threaded scenarios)")
    return parser


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def write_csv(result: ScenarioResult, out_path: str) -> None:
    if out_path == "-":
        _write_rows(result, sys.stdout)
    else:
        with open(out_path, "w", newline="") as handle:
            _write_rows(result, handle)


def _write_rows(result: ScenarioResult, handle) -> None:
    writer = csv.writer(handle)
    writer.writerow(result.fieldnames)
    for row in result.rows:
        writer.writerow([_format_value(v) for v in row])


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    if args.scenario not in SCENARIOS:
        print(f"error: unknown scenario {args.scenario!r}", file=sys.stderr)
        print("valid scenarios: " + ", ".join(sorted(SCENARIOS)),
              file=sys.stderr)
        return EXIT_USAGE

    try:
        config = (load_config(args.config) if args.config
                  else BenchConfig())
        config.scenario = args.scenario
        if args.repetitions is not None:
            config.repetitions = args.repetitions
        config.validate()
        result = run_scenario(args.scenario, config,
                              virtual=args.virtual_clock)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    write_csv(result, args.out)
    for note in result.notes:
        print(note, file=sys.stderr)
    return EXIT_OK


def main() -> None:  # console-script entry point
    sys.exit(cli_main())
