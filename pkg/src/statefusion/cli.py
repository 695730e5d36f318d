"""Batch command-line runner for the demonstration scenarios.

Usage::

    statefusion run <config.toml> [--seed N] [--out DIR] [--format csv|jsonl]
    statefusion validate <config.toml>
    statefusion list-scenarios

``run`` executes one scenario, writes its trace file (CSV by default) into the
output directory and prints a JSON summary to stdout.  Output directory
precedence: ``--out`` flag, then the ``STATEFUSION_OUT`` environment variable,
then the ``out`` key in the config, then ``./runs``.

Exit codes: 0 on success, 2 for configuration errors, 3 when a scenario hits
its defined failure condition.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from .scenarios import (
    ConfigError,
    ScenarioFailure,
    TraceRecord,
    available_scenarios,
    load_config,
    run_scenario,
    validate_config,
)

_ENV_OUT = "STATEFUSION_OUT"


def _cell(value: float) -> str:
    return format(float(value), ".17g")


def _columns(record: TraceRecord) -> List[str]:
    cols = ["t"]
    if record.truth is not None:
        cols += [f"truth_{i}" for i in range(record.truth.size)]
    cols += [f"est_{i}" for i in range(record.estimate.size)]
    cols += [f"covdiag_{i}" for i in range(record.cov_diag.size)]
    cols += sorted(record.extras)
    return cols


def _write_csv(records: List[TraceRecord], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if not records:
            writer.writerow(["t"])
            return
        writer.writerow(_columns(records[0]))
        for rec in records:
            row = [_cell(rec.t)]
            if rec.truth is not None:
                row += [_cell(v) for v in rec.truth]
            row += [_cell(v) for v in rec.estimate]
            row += [_cell(v) for v in rec.cov_diag]
            row += [_cell(rec.extras[k]) for k in sorted(rec.extras)]
            writer.writerow(row)


def _write_jsonl(records: List[TraceRecord], path: Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps({
                "t": rec.t,
                "truth": None if rec.truth is None else list(rec.truth),
                "estimate": list(rec.estimate),
                "cov_diag": list(rec.cov_diag),
                "extras": rec.extras,
            }, sort_keys=True))
            fh.write("\n")


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        config.seed = args.seed
    fmt = args.format or config.out_format

    try:
        records, summary = run_scenario(config)
    except ScenarioFailure as exc:
        print(str(exc), file=sys.stderr)
        return 3

    out_dir = Path(args.out or os.environ.get(_ENV_OUT) or config.out or "runs")
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / f"{config.scenario}.{fmt}"
    if fmt == "csv":
        _write_csv(records, trace_path)
    else:
        _write_jsonl(records, trace_path)

    summary = dict(summary)
    summary["scenario"] = config.scenario
    summary["records"] = len(records)
    summary["trace_path"] = str(trace_path)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    problems = validate_config(args.config)
    for problem in problems:
        print(problem)
    if problems:
        return 2
    print("ok")
    return 0


def _cmd_list(_args: argparse.Namespace) -> int:
    for name in available_scenarios():
        print(name)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statefusion",
        description="Run reproducible state-estimation scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario config and write its trace")
    run_p.add_argument("config", help="path to a TOML scenario config")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--out", default=None, help="output directory for trace files")
    run_p.add_argument("--format", choices=("csv", "jsonl"), default=None,
                       help="trace file format (default: csv)")
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="check a config file and list problems")
    val_p.add_argument("config", help="path to a TOML scenario config")
    val_p.set_defaults(func=_cmd_validate)

    list_p = sub.add_parser("list-scenarios", help="print available scenario names")
    list_p.set_defaults(func=_cmd_list)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
