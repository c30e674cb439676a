"""Parsing and validation of exported run reports.

Three input shapes are accepted, matching what the simulator CLI writes:
a ladder CSV (fixed 15-column header), a ladder JSON document (schema tag
``ladder-v1`` with a ``runs`` list and classification flags), and a
single-report JSON object.  Everything is validated up front; any deviation
from the schema raises :class:`ParseError` with the file, row and field in
the message.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError

CSV_COLUMNS = [
    "part",
    "seed",
    "makespan",
    "completed",
    "overhead_scheduling",
    "overhead_migration",
    "overhead_replication",
    "overhead_aggregation",
    "migrations",
    "replicas",
    "faults",
    "recoveries",
    "cost",
    "job_completions",
    "trace_path",
]

OVERHEAD_KEYS = ("scheduling", "migration", "replication", "aggregation")
COUNT_KEYS = ("migrations", "replicas", "faults", "recoveries")
PARTS = ("A", "B", "C", "D", "E", "F")
LADDER_SCHEMA = "ladder-v1"

_RUN_JSON_KEYS = {
    "part",
    "seed",
    "makespan",
    "completed",
    "overheads",
    "counts",
    "job_completions",
    "cost",
    "trace_path",
}


@dataclass
class RunRow:
    """One validated report row, normalized across the CSV and JSON shapes."""

    part: str
    seed: int
    makespan: float | None
    completed: bool
    overheads: dict[str, float]
    counts: dict[str, int]
    job_completions: dict[str, float]
    cost: float
    trace_path: str | None
    source: str


@dataclass
class Classification:
    good_result: bool
    best_result: bool
    e_vs_b: float | None
    f_vs_a: float | None


@dataclass
class ReportSet:
    """Parsed rows plus where they came from.  Parts are unique by load-time
    validation, so ``by_part`` never silently drops a row."""

    runs: list[RunRow]
    sources: list[str] = field(default_factory=list)

    def by_part(self) -> dict[str, RunRow]:
        return {row.part: row for row in self.runs}


def classify_rows(rows: list[RunRow]) -> Classification:
    """Good/Best flags recomputed from the rows alone.

    Mirrors the exporter's rule: the delta is the slower part's makespan
    minus the faster one's, a flag holds only on a strictly positive delta,
    and any missing or incomplete run disqualifies the pair.
    """
    by_part = {row.part: row for row in rows}

    def delta(hi: str, lo: str) -> float | None:
        a, b = by_part.get(hi), by_part.get(lo)
        if a is None or b is None:
            return None
        if not (a.completed and b.completed) or a.makespan is None or b.makespan is None:
            return None
        return a.makespan - b.makespan

    e_vs_b = delta("B", "E")
    f_vs_a = delta("A", "F")
    return Classification(
        good_result=e_vs_b is not None and e_vs_b > 0,
        best_result=f_vs_a is not None and f_vs_a > 0,
        e_vs_b=e_vs_b,
        f_vs_a=f_vs_a,
    )


def load_reports(paths) -> ReportSet:
    """Parse one or more exported report files into a single ReportSet."""
    rows: list[RunRow] = []
    sources: list[str] = []
    for raw_path in paths:
        path = Path(raw_path)
        sources.append(str(path))
        suffix = path.suffix.lower()
        if suffix == ".csv":
            rows.extend(_load_csv(path))
        elif suffix == ".json":
            rows.extend(_load_json(path))
        else:
            raise ParseError(f"{path}: unsupported file type {suffix!r} (expected .csv or .json)")
    seen: dict[str, RunRow] = {}
    for row in rows:
        if row.part in seen:
            raise ParseError(
                f"part '{row.part}' appears more than once "
                f"({seen[row.part].source} and {row.source})"
            )
        seen[row.part] = row
    return ReportSet(runs=rows, sources=sources)


# ----------------------------------------------------------------- helpers

def _finite(value: float, where: str, name: str) -> float:
    if not math.isfinite(value):
        raise ParseError(f"{where}: field '{name}' is not finite: {value!r}")
    return value


def _float_field(raw, where: str, name: str, minimum: float | None = 0.0) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: field '{name}' is not a number: {raw!r}") from None
    _finite(value, where, name)
    if minimum is not None and value < minimum:
        raise ParseError(f"{where}: field '{name}' must be >= {minimum}, got {value!r}")
    return value


def _int_field(raw, where: str, name: str) -> int:
    if isinstance(raw, bool):
        raise ParseError(f"{where}: field '{name}' is not an integer: {raw!r}")
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: field '{name}' is not an integer: {raw!r}") from None
    return value


def _check_part(raw, where: str) -> str:
    if raw not in PARTS:
        raise ParseError(f"{where}: field 'part' must be one of {'/'.join(PARTS)}, got {raw!r}")
    return raw


def _check_consistency(completed: bool, makespan: float | None, where: str) -> None:
    if completed and makespan is None:
        raise ParseError(f"{where}: completed run has no makespan")
    if not completed and makespan is not None:
        raise ParseError(f"{where}: incomplete run carries a makespan")


# --------------------------------------------------------------------- CSV

def _load_csv(path: Path) -> list[RunRow]:
    try:
        with open(path, newline="") as handle:
            raw_rows = list(csv.reader(handle))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not raw_rows:
        raise ParseError(f"{path}: empty file")
    header = raw_rows[0]
    if header != CSV_COLUMNS:
        missing = [col for col in CSV_COLUMNS if col not in header]
        if missing:
            raise ParseError(f"{path}: missing column '{missing[0]}'")
        raise ParseError(f"{path}: unexpected header {header!r}")
    if len(raw_rows) == 1:
        raise ParseError(f"{path}: no data rows")
    rows = []
    for lineno, raw in enumerate(raw_rows[1:], start=2):
        where = f"{path} row {lineno}"
        if len(raw) != len(CSV_COLUMNS):
            raise ParseError(
                f"{where}: expected {len(CSV_COLUMNS)} fields, got {len(raw)}"
            )
        rec = dict(zip(CSV_COLUMNS, raw))
        part = _check_part(rec["part"], where)
        seed = _int_field(rec["seed"], where, "seed")
        makespan = None if rec["makespan"] == "" else _float_field(rec["makespan"], where, "makespan")
        if rec["completed"] not in ("true", "false"):
            raise ParseError(
                f"{where}: field 'completed' must be 'true' or 'false', got {rec['completed']!r}"
            )
        completed = rec["completed"] == "true"
        _check_consistency(completed, makespan, where)
        overheads = {
            key: _float_field(rec[f"overhead_{key}"], where, f"overhead_{key}")
            for key in OVERHEAD_KEYS
        }
        counts = {}
        for key in COUNT_KEYS:
            value = _int_field(rec[key], where, key)
            if value < 0:
                raise ParseError(f"{where}: field '{key}' must be >= 0, got {value}")
            counts[key] = value
        cost = _float_field(rec["cost"], where, "cost")
        completions = _parse_completions(rec["job_completions"], where)
        trace_path = rec["trace_path"] or None
        rows.append(RunRow(
            part=part,
            seed=seed,
            makespan=makespan,
            completed=completed,
            overheads=overheads,
            counts=counts,
            job_completions=completions,
            cost=cost,
            trace_path=trace_path,
            source=where,
        ))
    return rows


def _parse_completions(raw: str, where: str) -> dict[str, float]:
    if raw == "":
        return {}
    out = {}
    for chunk in raw.split(";"):
        name, sep, value = chunk.partition("=")
        if not sep or not name:
            raise ParseError(f"{where}: field 'job_completions' has a malformed entry {chunk!r}")
        out[name] = _float_field(value, where, f"job_completions[{name}]")
    return out


# -------------------------------------------------------------------- JSON

def _load_json(path: Path) -> list[RunRow]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    if "schema" in doc or "runs" in doc:
        schema = doc.get("schema")
        if schema != LADDER_SCHEMA:
            raise ParseError(f"{path}: unsupported schema {schema!r} (expected {LADDER_SCHEMA!r})")
        runs = doc.get("runs")
        if not isinstance(runs, list) or not runs:
            raise ParseError(f"{path}: 'runs' must be a non-empty list")
        rows = [_row_from_json(item, f"{path} run {i}") for i, item in enumerate(runs)]
        if "classification" in doc:
            _check_classification(doc["classification"], rows, path)
        return rows
    if "part" in doc:
        return [_row_from_json(doc, str(path))]
    raise ParseError(f"{path}: unrecognized JSON document (no 'schema' or 'part' key)")


def _row_from_json(item, where: str) -> RunRow:
    if not isinstance(item, dict):
        raise ParseError(f"{where}: run entry must be an object")
    missing = sorted(_RUN_JSON_KEYS - item.keys())
    if missing:
        raise ParseError(f"{where}: missing field '{missing[0]}'")
    unknown = sorted(item.keys() - _RUN_JSON_KEYS)
    if unknown:
        raise ParseError(f"{where}: unknown field '{unknown[0]}'")
    part = _check_part(item["part"], where)
    seed = _int_field(item["seed"], where, "seed")
    makespan = item["makespan"]
    if makespan is not None:
        makespan = _float_field(makespan, where, "makespan")
    if not isinstance(item["completed"], bool):
        raise ParseError(f"{where}: field 'completed' must be a boolean")
    completed = item["completed"]
    _check_consistency(completed, makespan, where)

    overheads_raw = item["overheads"]
    if not isinstance(overheads_raw, dict) or set(overheads_raw) != set(OVERHEAD_KEYS):
        raise ParseError(
            f"{where}: field 'overheads' must map exactly {sorted(OVERHEAD_KEYS)}"
        )
    overheads = {
        key: _float_field(overheads_raw[key], where, f"overheads.{key}")
        for key in OVERHEAD_KEYS
    }

    counts_raw = item["counts"]
    if not isinstance(counts_raw, dict) or set(counts_raw) != set(COUNT_KEYS):
        raise ParseError(f"{where}: field 'counts' must map exactly {sorted(COUNT_KEYS)}")
    counts = {}
    for key in COUNT_KEYS:
        value = _int_field(counts_raw[key], where, f"counts.{key}")
        if value < 0:
            raise ParseError(f"{where}: field 'counts.{key}' must be >= 0, got {value}")
        counts[key] = value

    completions_raw = item["job_completions"]
    if not isinstance(completions_raw, dict):
        raise ParseError(f"{where}: field 'job_completions' must be an object")
    completions = {
        str(name): _float_field(value, where, f"job_completions.{name}")
        for name, value in completions_raw.items()
    }

    cost = _float_field(item["cost"], where, "cost")
    trace_path = item["trace_path"]
    if trace_path is not None and not isinstance(trace_path, str):
        raise ParseError(f"{where}: field 'trace_path' must be a string or null")
    return RunRow(
        part=part,
        seed=seed,
        makespan=makespan,
        completed=completed,
        overheads=overheads,
        counts=counts,
        job_completions=completions,
        cost=cost,
        trace_path=trace_path,
        source=where,
    )


def _check_classification(block, rows: list[RunRow], path: Path) -> None:
    if not isinstance(block, dict):
        raise ParseError(f"{path}: 'classification' must be an object")
    expected = classify_rows(rows)
    for name, want in (("good_result", expected.good_result),
                       ("best_result", expected.best_result)):
        if name not in block:
            raise ParseError(f"{path}: classification is missing '{name}'")
        value = block[name]
        if not isinstance(value, bool):
            raise ParseError(f"{path}: classification '{name}' must be a boolean")
        if value is not want:
            raise ParseError(
                f"{path}: classification {name}={value} disagrees with the run rows"
            )
    deltas = block.get("deltas")
    if deltas is not None:
        if not isinstance(deltas, dict):
            raise ParseError(f"{path}: classification 'deltas' must be an object")
        for name, want in (("e_vs_b", expected.e_vs_b), ("f_vs_a", expected.f_vs_a)):
            if name in deltas and deltas[name] != want:
                raise ParseError(
                    f"{path}: classification delta {name}={deltas[name]!r} "
                    f"disagrees with the run rows ({want!r})"
                )
