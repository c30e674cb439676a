"""Scenario ladder: resolve part configurations, run them, export reports.

The ladder is six parts, A through F.  Each part fixes a placement mode and a
set of service toggles; a config file can override any of it, globally via a
``defaults`` section or per part via a ``parts`` section.  Precedence, lowest
to highest: built-in part defaults, then ``defaults``, then ``parts[P]``.

Exports are plain JSON and CSV so that downstream tooling never needs to
import the simulator.  Column order in the CSV is fixed and documented in
`CSV_COLUMNS`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path

import yaml

from .config import MAX_REPLICAS, PolicyParams, Toggles
from .dispatcher import PlacementMode, ProvisionThresholds, RatingWeights
from .engine import Engine, EngineResult
from .environment import build_environment
from .errors import (
    EnvironmentFileError,
    InvalidConfig,
    IoError,
    WorkloadFileError,
)
from .simkernel import ZERO, rng_stream
from .workload import generate_workload


class Part(Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"


@dataclass(frozen=True)
class ScenarioConfig:
    part: Part
    mode: PlacementMode
    toggles: Toggles
    params: PolicyParams
    apply_floor: bool

    def effective_params(self) -> PolicyParams:
        if self.apply_floor:
            return self.params
        return replace(self.params, rating_floor=Fraction(0))


def _part_defaults(part: Part) -> ScenarioConfig:
    base = PolicyParams()
    if part is Part.A:
        return ScenarioConfig(part, PlacementMode.BASELINE, Toggles(), base, False)
    if part is Part.B:
        return ScenarioConfig(
            part, PlacementMode.BASELINE, Toggles(scheduling=True), base, False
        )
    if part is Part.C:
        toggles = Toggles(scheduling=True, replication=True, churn=True)
        return ScenarioConfig(part, PlacementMode.BASELINE, toggles, base, False)
    everything = Toggles(
        scheduling=True,
        migration=True,
        replication=True,
        aggregation_accounting=True,
        churn=True,
    )
    if part is Part.D:
        naive = replace(base, hysteresis=Fraction(0), replicas=MAX_REPLICAS, batch_period=None)
        return ScenarioConfig(part, PlacementMode.BASELINE, everything, naive, False)
    if part is Part.E:
        return ScenarioConfig(part, PlacementMode.SMART, everything, base, False)
    return ScenarioConfig(part, PlacementMode.SMART, everything, base, True)


_TOGGLE_FIELDS = ("scheduling", "migration", "replication", "aggregation_accounting", "churn")
_PARAM_FIELDS = (
    "weights",
    "hysteresis",
    "replicas",
    "rating_floor",
    "scheduling_service_time",
    "batch_period",
    "rebuild_delay",
    "heartbeat_period",
    "migration_period",
    "thresholds",
    "restrict_cloud",
    "max_sim_time",
)
_THRESHOLD_FIELDS = (
    "completion_c",
    "checkpoint_frac",
    "assignment_a",
    "grace",
    "variance_v",
    "deadline",
)
_WEIGHT_FIELDS = ("cpu", "mem", "io", "net", "hist")


def _as_number(value, path: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise InvalidConfig(f"{path}: expected a number, got {value!r}")
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidConfig(f"{path}: not a number: {value!r}") from exc


def _apply_overlay(cfg: ScenarioConfig, overlay: dict, path: str) -> ScenarioConfig:
    if not isinstance(overlay, dict):
        raise InvalidConfig(f"{path}: expected a mapping")
    mode, toggles, params, apply_floor = cfg.mode, cfg.toggles, cfg.params, cfg.apply_floor
    for key, value in overlay.items():
        if key == "mode":
            try:
                mode = PlacementMode(value)
            except ValueError:
                raise InvalidConfig(f"{path}.mode: unknown mode {value!r}") from None
        elif key == "apply_floor":
            if not isinstance(value, bool):
                raise InvalidConfig(f"{path}.apply_floor: expected true or false")
            apply_floor = value
        elif key == "toggles":
            if not isinstance(value, dict):
                raise InvalidConfig(f"{path}.toggles: expected a mapping")
            updates = {}
            for tkey, tval in value.items():
                if tkey not in _TOGGLE_FIELDS:
                    raise InvalidConfig(f"{path}.toggles.{tkey}: unknown toggle")
                if not isinstance(tval, bool):
                    raise InvalidConfig(f"{path}.toggles.{tkey}: expected true or false")
                updates[tkey] = tval
            toggles = replace(toggles, **updates)
        elif key == "params":
            params = _apply_params(params, value, f"{path}.params")
        else:
            raise InvalidConfig(f"{path}.{key}: unknown section")
    return ScenarioConfig(cfg.part, mode, toggles, params, apply_floor)


def _apply_params(params: PolicyParams, overlay, path: str) -> PolicyParams:
    if not isinstance(overlay, dict):
        raise InvalidConfig(f"{path}: expected a mapping")
    updates = {}
    for key, value in overlay.items():
        if key not in _PARAM_FIELDS:
            raise InvalidConfig(f"{path}.{key}: unknown parameter")
        if key == "weights":
            if not isinstance(value, dict):
                raise InvalidConfig(f"{path}.weights: expected a mapping")
            for wkey in value:
                if wkey not in _WEIGHT_FIELDS:
                    raise InvalidConfig(f"{path}.weights.{wkey}: unknown weight")
            parts = {
                w: _as_number(value[w], f"{path}.weights.{w}") if w in value else default
                for w, default in zip(
                    _WEIGHT_FIELDS,
                    (
                        params.weights.w_cpu,
                        params.weights.w_mem,
                        params.weights.w_io,
                        params.weights.w_net,
                        params.weights.w_hist,
                    ),
                )
            }
            updates["weights"] = RatingWeights.normalized(
                parts["cpu"], parts["mem"], parts["io"], parts["net"], parts["hist"]
            )
        elif key == "replicas":
            if value == MAX_REPLICAS:
                updates["replicas"] = MAX_REPLICAS
            elif isinstance(value, int) and not isinstance(value, bool) and value >= 0:
                updates["replicas"] = value
            else:
                raise InvalidConfig(f"{path}.replicas: expected a non-negative integer or 'max'")
        elif key == "batch_period":
            if value is None:
                updates["batch_period"] = None
            else:
                period = _as_number(value, f"{path}.batch_period")
                if period <= 0:
                    raise InvalidConfig(f"{path}.batch_period: must be positive or null")
                updates["batch_period"] = period
        elif key == "restrict_cloud":
            if not isinstance(value, bool):
                raise InvalidConfig(f"{path}.restrict_cloud: expected true or false")
            updates["restrict_cloud"] = value
        elif key == "thresholds":
            if not isinstance(value, dict):
                raise InvalidConfig(f"{path}.thresholds: expected a mapping")
            tupdates = {}
            for tkey, tval in value.items():
                if tkey not in _THRESHOLD_FIELDS:
                    raise InvalidConfig(f"{path}.thresholds.{tkey}: unknown threshold")
                tupdates[tkey] = _as_number(tval, f"{path}.thresholds.{tkey}")
            updates["thresholds"] = replace(params.thresholds, **tupdates)
        else:
            number = _as_number(value, f"{path}.{key}")
            if key in ("hysteresis", "rating_floor", "scheduling_service_time") and number < 0:
                raise InvalidConfig(f"{path}.{key}: must be non-negative")
            if (
                key in ("rebuild_delay", "heartbeat_period", "migration_period", "max_sim_time")
                and number <= 0
            ):
                raise InvalidConfig(f"{path}.{key}: must be positive")
            updates[key] = number
    out = replace(params, **updates)
    if out.batch_period is not None and out.rebuild_delay >= out.batch_period:
        raise InvalidConfig(f"{path}: rebuild_delay must be smaller than batch_period")
    return out


def resolve_scenario(part: Part, config: dict | None = None) -> ScenarioConfig:
    cfg = _part_defaults(part)
    if config is None:
        return cfg
    if not isinstance(config, dict):
        raise InvalidConfig("config: expected a mapping at top level")
    for key in config:
        if key not in ("defaults", "parts"):
            raise InvalidConfig(f"config.{key}: unknown section")
    if "defaults" in config:
        cfg = _apply_overlay(cfg, config["defaults"], "defaults")
    parts_section = config.get("parts", {})
    if not isinstance(parts_section, dict):
        raise InvalidConfig("parts: expected a mapping of part letters")
    for pkey in parts_section:
        if pkey not in Part.__members__:
            raise InvalidConfig(f"parts.{pkey}: unknown part (expected A..F)")
    if part.value in parts_section:
        cfg = _apply_overlay(cfg, parts_section[part.value], f"parts.{part.value}")
    return cfg


# --------------------------------------------------------------------- files


def _load_structured(path: str | Path, error_cls, what: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise error_cls(f"cannot read {what} file {p}: {exc}") from exc
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise error_cls(f"cannot parse {what} file {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise error_cls(f"{what} file {p} must contain a mapping at top level")
    return data


def load_environment_file(path: str | Path) -> dict:
    return _load_structured(path, EnvironmentFileError, "environment")


def load_workload_file(path: str | Path) -> dict:
    return _load_structured(path, WorkloadFileError, "workload")


def load_config_file(path: str | Path) -> dict:
    return _load_structured(path, InvalidConfig, "config")


# ---------------------------------------------------------------------- runs


@dataclass
class RunReport:
    part: str
    seed: int
    makespan: float | None
    completed: bool
    overheads: dict[str, float]
    counts: dict[str, int]
    job_completions: dict[str, float]
    cost: float
    trace_path: str | None = None


def _to_report(part: Part, seed: int, result: EngineResult, trace_path: str | None) -> RunReport:
    return RunReport(
        part=part.value,
        seed=seed,
        makespan=float(result.makespan) if result.makespan is not None else None,
        completed=result.completed,
        overheads={k: float(v) for k, v in sorted(result.overheads.items())},
        counts=dict(result.counts),
        job_completions={k: float(v) for k, v in sorted(result.job_completions.items())},
        cost=float(result.cost),
        trace_path=trace_path,
    )


def run_scenario(
    part: Part,
    env_spec: dict,
    workload_spec: dict,
    seed: int,
    config: dict | None = None,
    trace_path: str | Path | None = None,
) -> RunReport:
    """Run one part and return its report.  Workload generation is seeded
    independently of churn, so every part of a ladder sees the same tasks."""
    part = Part(part)
    cfg = resolve_scenario(part, config)
    env = build_environment(env_spec)
    workload = generate_workload(workload_spec, rng_stream(seed, "workload"))
    engine = Engine(env, workload, cfg.toggles, cfg.mode, cfg.effective_params(), seed)
    result = engine.run()
    trace_str = None
    if trace_path is not None:
        trace_str = str(trace_path)
        try:
            result.views.log.write_jsonl(trace_path)
        except OSError as exc:
            raise IoError(f"cannot write trace {trace_path}: {exc}") from exc
    return _to_report(part, seed, result, trace_str)


@dataclass
class Classification:
    good_result: bool
    best_result: bool
    e_vs_b: float | None
    f_vs_a: float | None


@dataclass
class LadderResult:
    runs: list[RunReport]
    classification: Classification


def classify(reports: list[RunReport]) -> Classification:
    """Good Result: the tuned smart ladder (E) strictly beats the scheduled
    baseline (B).  Best Result: the full policy stack (F) strictly beats the
    bare baseline (A).  Incomplete runs never qualify."""
    by_part = {r.part: r for r in reports}

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


def run_ladder(
    env_spec: dict,
    workload_spec: dict,
    seed: int,
    config: dict | None = None,
    trace_dir: str | Path | None = None,
) -> LadderResult:
    reports = []
    for part in Part:
        trace_path = None
        if trace_dir is not None:
            trace_path = Path(trace_dir) / f"part-{part.value}.jsonl"
        reports.append(
            run_scenario(part, env_spec, workload_spec, seed, config, trace_path=trace_path)
        )
    return LadderResult(runs=reports, classification=classify(reports))


# ------------------------------------------------------------------- exports

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


def report_to_dict(report: RunReport) -> dict:
    return {
        "part": report.part,
        "seed": report.seed,
        "makespan": report.makespan,
        "completed": report.completed,
        "overheads": dict(report.overheads),
        "counts": dict(report.counts),
        "job_completions": dict(report.job_completions),
        "cost": report.cost,
        "trace_path": report.trace_path,
    }


def report_to_row(report: RunReport) -> list:
    completions = ";".join(
        f"{job}={value!r}" for job, value in sorted(report.job_completions.items())
    )
    return [
        report.part,
        report.seed,
        "" if report.makespan is None else repr(report.makespan),
        "true" if report.completed else "false",
        repr(report.overheads.get("scheduling", 0.0)),
        repr(report.overheads.get("migration", 0.0)),
        repr(report.overheads.get("replication", 0.0)),
        repr(report.overheads.get("aggregation", 0.0)),
        report.counts.get("migrations", 0),
        report.counts.get("replicas", 0),
        report.counts.get("faults", 0),
        report.counts.get("recoveries", 0),
        repr(report.cost),
        completions,
        report.trace_path or "",
    ]


def export_report_json(report: RunReport, path: str | Path) -> None:
    try:
        Path(path).write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc


def export_reports_csv(reports: list[RunReport], path: str | Path) -> None:
    try:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for report in reports:
                writer.writerow(report_to_row(report))
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc


def ladder_to_dict(ladder: LadderResult) -> dict:
    return {
        "schema": "ladder-v1",
        "runs": [report_to_dict(r) for r in ladder.runs],
        "classification": {
            "good_result": ladder.classification.good_result,
            "best_result": ladder.classification.best_result,
            "deltas": {
                "e_vs_b": ladder.classification.e_vs_b,
                "f_vs_a": ladder.classification.f_vs_a,
            },
        },
    }


def export_ladder_json(ladder: LadderResult, path: str | Path) -> None:
    try:
        Path(path).write_text(json.dumps(ladder_to_dict(ladder), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write ladder {path}: {exc}") from exc


def export_ladder_csv(ladder: LadderResult, path: str | Path) -> None:
    export_reports_csv(ladder.runs, path)
