"""Figure generation from a parsed ReportSet.

The chart content is computed by pure series functions (``ladder_series``,
``overhead_series``) so it can be tested without decoding image files; the
render functions only hand those series to matplotlib.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import IncompleteLadder, ParseError
from .loader import OVERHEAD_KEYS, PARTS, ReportSet, RunRow, classify_rows

SEGMENTS = ("execution",) + OVERHEAD_KEYS

_COLORS = {
    "execution": "#4c72b0",
    "scheduling": "#dd8452",
    "migration": "#55a868",
    "replication": "#c44e52",
    "aggregation": "#8172b3",
}


def _complete_ladder(report_set: ReportSet) -> dict[str, RunRow]:
    by_part: dict[str, RunRow] = {}
    for row in report_set.runs:
        if row.part in by_part:
            raise ParseError(f"part '{row.part}' appears more than once")
        by_part[row.part] = row
    missing = [part for part in PARTS if part not in by_part]
    if missing:
        raise IncompleteLadder(f"ladder is missing part(s) {', '.join(missing)}")
    for part in PARTS:
        if by_part[part].makespan is None:
            raise IncompleteLadder(f"part {part} has no makespan")
    return by_part


def ladder_series(report_set: ReportSet) -> dict:
    """Bar heights and annotation labels for the ladder chart."""
    by_part = _complete_ladder(report_set)
    flags = classify_rows(report_set.runs)
    annotations = []
    if flags.good_result:
        annotations.append("Good Result")
    if flags.best_result:
        annotations.append("Best Result")
    return {
        "parts": list(PARTS),
        "makespans": [by_part[part].makespan for part in PARTS],
        "annotations": annotations,
        "deltas": {"e_vs_b": flags.e_vs_b, "f_vs_a": flags.f_vs_a},
    }


def overhead_series(report_set: ReportSet) -> dict:
    """Stacked segment values per part.

    The execution segment is the makespan minus the four charged overheads,
    so each stack sums back to the makespan.  Rows whose overheads exceed
    their makespan cannot be drawn this way and are rejected.
    """
    by_part = _complete_ladder(report_set)
    segments: dict[str, list[float]] = {name: [] for name in SEGMENTS}
    makespans = []
    for part in PARTS:
        row = by_part[part]
        total = sum(row.overheads[key] for key in OVERHEAD_KEYS)
        execution = row.makespan - total
        # a few ulps of float residue are not a schema violation
        if execution < -1e-9 * max(abs(row.makespan), 1.0):
            raise ParseError(
                f"part {part}: overheads sum to {total!r}, which exceeds "
                f"the makespan {row.makespan!r}"
            )
        if execution < 0:
            execution = 0.0
        segments["execution"].append(execution)
        for key in OVERHEAD_KEYS:
            segments[key].append(row.overheads[key])
        makespans.append(row.makespan)
    return {"parts": list(PARTS), "segments": segments, "makespans": makespans}


def render_ladder_chart(report_set: ReportSet, out_path) -> Path:
    """Makespan bars for parts A through F with Good/Best annotations."""
    series = ladder_series(report_set)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    try:
        bars = ax.bar(series["parts"], series["makespans"], color=_COLORS["execution"])
        ax.bar_label(bars, fmt="%.4g", padding=2, fontsize=8)
        ax.set_xlabel("scenario part")
        ax.set_ylabel("makespan [s]")
        ax.set_title("Scenario ladder")
        if series["annotations"]:
            caption = ", ".join(series["annotations"])
            weight = "bold"
        else:
            caption = "no Good/Best result"
            weight = "normal"
        ax.annotate(
            caption,
            xy=(0.98, 0.96),
            xycoords="axes fraction",
            ha="right",
            va="top",
            fontsize=10,
            fontweight=weight,
        )
        fig.tight_layout()
        fig.savefig(out_path)
    finally:
        plt.close(fig)
    return Path(out_path)


def render_overhead_chart(report_set: ReportSet, out_path) -> Path:
    """Stacked execution-plus-overheads breakdown per part."""
    series = overhead_series(report_set)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    try:
        bottoms = [0.0] * len(series["parts"])
        for name in SEGMENTS:
            values = series["segments"][name]
            ax.bar(series["parts"], values, bottom=bottoms, label=name, color=_COLORS[name])
            bottoms = [b + v for b, v in zip(bottoms, values)]
        ax.set_xlabel("scenario part")
        ax.set_ylabel("time [s]")
        ax.set_title("Makespan breakdown")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out_path)
    finally:
        plt.close(fig)
    return Path(out_path)
