"""Command line front end.

Two subcommands: ``run`` executes a single part, ``ladder`` executes all six
parts with the same seed and reports the Good/Best classification.  All
domain errors (bad config, unreadable files, invalid node or task specs)
print a one-line diagnostic to stderr and exit with status 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .errors import SimulationError
from .scenarios import (
    Part,
    export_ladder_json,
    export_report_json,
    export_reports_csv,
    ladder_to_dict,
    load_config_file,
    load_environment_file,
    load_workload_file,
    report_to_dict,
    report_to_row,
    run_ladder,
    run_scenario,
    CSV_COLUMNS,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parser.add_argument("--env", required=True, help="environment spec file (YAML or JSON)")
    parser.add_argument("--workload", required=True, help="workload spec file (YAML or JSON)")
    parser.add_argument("--config", help="optional scenario config file")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument(
        "--format", choices=("json", "csv"), default="json", help="output format (default json)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lambdagrid",
        description="Deterministic simulator of a hybrid cloud and desktop-grid dispatcher.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a single scenario part")
    run_p.add_argument(
        "--part", required=True, choices=[p.value for p in Part], help="scenario part"
    )
    _add_common(run_p)
    run_p.add_argument("--trace", help="write the full event trace to this JSON-Lines file")

    ladder_p = sub.add_parser("ladder", help="run parts A through F and classify the outcome")
    _add_common(ladder_p)
    ladder_p.add_argument("--trace", help="write per-part event traces into this directory")

    return parser


def _emit_csv_stdout(rows: list[list]) -> None:
    writer = csv.writer(sys.stdout)
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row)


def _cmd_run(args: argparse.Namespace) -> int:
    env_spec = load_environment_file(args.env)
    workload_spec = load_workload_file(args.workload)
    config = load_config_file(args.config) if args.config else None
    report = run_scenario(
        Part(args.part),
        env_spec,
        workload_spec,
        args.seed,
        config=config,
        trace_path=args.trace,
    )
    if args.format == "csv":
        if args.out:
            export_reports_csv([report], args.out)
        else:
            _emit_csv_stdout([report_to_row(report)])
    else:
        if args.out:
            export_report_json(report, args.out)
        else:
            json.dump(report_to_dict(report), sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
    return 0


def _cmd_ladder(args: argparse.Namespace) -> int:
    env_spec = load_environment_file(args.env)
    workload_spec = load_workload_file(args.workload)
    config = load_config_file(args.config) if args.config else None
    if args.trace:
        Path(args.trace).mkdir(parents=True, exist_ok=True)
    ladder = run_ladder(
        env_spec, workload_spec, args.seed, config=config, trace_dir=args.trace
    )
    if args.format == "csv":
        if args.out:
            export_reports_csv(ladder.runs, args.out)
        else:
            _emit_csv_stdout([report_to_row(r) for r in ladder.runs])
    else:
        if args.out:
            export_ladder_json(ladder, args.out)
        else:
            json.dump(ladder_to_dict(ladder), sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
    cls = ladder.classification
    print(
        f"good_result={'yes' if cls.good_result else 'no'} "
        f"best_result={'yes' if cls.best_result else 'no'}",
        file=sys.stderr,
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_ladder(args)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
