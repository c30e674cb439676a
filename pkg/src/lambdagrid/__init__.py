"""Deterministic simulator of a lambda-style dispatcher over a hybrid
cloud and desktop-grid environment."""

from .config import MAX_REPLICAS, PolicyParams, Toggles
from .dispatcher import (
    Dispatcher,
    PlacementMode,
    ProvisionThresholds,
    RatingWeights,
    TimeEstimate,
    compute_seconds,
    estimate_time,
    plan_aggregation,
    plan_replicas,
    provision_cloud,
    rate_node,
    should_migrate,
)
from .engine import Engine, EngineResult
from .environment import Environment, NodeClass, NodeSpec, build_environment, transfer_time
from .errors import InvalidConfig, InvalidSpec, SimulationError
from .scenarios import (
    Classification,
    LadderResult,
    Part,
    RunReport,
    classify,
    run_ladder,
    run_scenario,
)
from .simkernel import SimKernel, SimTime, as_time, rng_stream
from .views import EnvSnapshot, LogRecord, MasterLog, RecordKind, ViewStore
from .workload import BatchingPolicy, MicroBatcher, TaskSpec, Workload, generate_workload

__version__ = "0.1.0"

__all__ = [
    "MAX_REPLICAS",
    "PolicyParams",
    "Toggles",
    "Dispatcher",
    "PlacementMode",
    "ProvisionThresholds",
    "RatingWeights",
    "TimeEstimate",
    "compute_seconds",
    "estimate_time",
    "plan_aggregation",
    "plan_replicas",
    "provision_cloud",
    "rate_node",
    "should_migrate",
    "Engine",
    "EngineResult",
    "Environment",
    "NodeClass",
    "NodeSpec",
    "build_environment",
    "transfer_time",
    "InvalidConfig",
    "InvalidSpec",
    "SimulationError",
    "Classification",
    "LadderResult",
    "Part",
    "RunReport",
    "classify",
    "run_ladder",
    "run_scenario",
    "SimKernel",
    "SimTime",
    "as_time",
    "rng_stream",
    "EnvSnapshot",
    "LogRecord",
    "MasterLog",
    "RecordKind",
    "ViewStore",
    "BatchingPolicy",
    "MicroBatcher",
    "TaskSpec",
    "Workload",
    "generate_workload",
    "__version__",
]
