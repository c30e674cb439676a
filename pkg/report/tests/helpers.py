"""Small builders shared by the report tool's tests."""

from pathlib import Path

from reportviz.loader import ReportSet, RunRow

FIXTURES = Path(__file__).parent / "fixtures"

LADDER_BEST_CSV = FIXTURES / "ladder_best.csv"
LADDER_BEST_JSON = FIXTURES / "ladder_best.json"
LADDER_GOOD_CSV = FIXTURES / "ladder_good.csv"
LADDER_HOMOG_JSON = FIXTURES / "ladder_homog.json"
RUN_A_JSON = FIXTURES / "run_a.json"


def row(part, makespan, completed=True, seed=0, scheduling=0.0, migration=0.0,
        replication=0.0, aggregation=0.0, cost=0.0, trace=None):
    return RunRow(
        part=part,
        seed=seed,
        makespan=makespan,
        completed=completed,
        overheads={
            "scheduling": scheduling,
            "migration": migration,
            "replication": replication,
            "aggregation": aggregation,
        },
        counts={"migrations": 0, "replicas": 0, "faults": 0, "recoveries": 0},
        job_completions={},
        cost=cost,
        trace_path=trace,
        source=f"test:{part}",
    )


def make_set(rows):
    return ReportSet(runs=list(rows), sources=["test"])


def ladder(makespans, **kwargs):
    """Six-part set from a part-to-makespan mapping."""
    return make_set(row(part, makespans[part], **kwargs) for part in "ABCDEF")
