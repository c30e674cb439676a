"""Command line front end: ``report ladder --in <files> --out-dir <dir>``.

Reads exported report files, renders the ladder and overhead figures as both
PNG and SVG into the output directory, and prints the written paths.  Any
domain error exits with status 1 and a one-line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .charts import render_ladder_chart, render_overhead_chart
from .errors import ReportError
from .loader import load_reports


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="report",
        description="Render comparison figures from exported simulator run reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    ladder_p = sub.add_parser("ladder", help="render ladder and overhead charts")
    ladder_p.add_argument(
        "--in",
        dest="inputs",
        nargs="+",
        required=True,
        metavar="FILE",
        help="exported report files (.csv or .json); parts may be split across files",
    )
    ladder_p.add_argument("--out-dir", required=True, help="directory for the figures")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report_set = load_reports(args.inputs)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for render, stem in (
            (render_ladder_chart, "ladder"),
            (render_overhead_chart, "overheads"),
        ):
            for ext in ("png", "svg"):
                written.append(render(report_set, out_dir / f"{stem}.{ext}"))
        for path in written:
            print(path)
        return 0
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
