"""Figures from exported simulator run reports."""

from .charts import (
    SEGMENTS,
    ladder_series,
    overhead_series,
    render_ladder_chart,
    render_overhead_chart,
)
from .errors import IncompleteLadder, ParseError, ReportError
from .loader import (
    CSV_COLUMNS,
    Classification,
    ReportSet,
    RunRow,
    classify_rows,
    load_reports,
)

__all__ = [
    "CSV_COLUMNS",
    "Classification",
    "IncompleteLadder",
    "ParseError",
    "ReportError",
    "ReportSet",
    "RunRow",
    "SEGMENTS",
    "classify_rows",
    "ladder_series",
    "load_reports",
    "overhead_series",
    "render_ladder_chart",
    "render_overhead_chart",
]
