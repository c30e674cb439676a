"""Shared run-configuration dataclasses.

Kept separate from the scenario ladder logic so the execution engine can
depend on them without importing scenario resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .dispatcher import DEFAULT_WEIGHTS, ProvisionThresholds, RatingWeights
from .simkernel import SimTime, ZERO


@dataclass(frozen=True)
class Toggles:
    """Which services run (and are charged for) in a scenario part."""

    scheduling: bool = False
    migration: bool = False
    replication: bool = False
    aggregation_accounting: bool = False
    churn: bool = False


MAX_REPLICAS = "max"  # replicate onto every other available node


@dataclass(frozen=True)
class PolicyParams:
    """Tunable policy parameters, shared by all scenario parts of a ladder."""

    weights: RatingWeights = DEFAULT_WEIGHTS
    hysteresis: Fraction = Fraction(1, 5)
    replicas: int | str = 1  # an int, or MAX_REPLICAS
    rating_floor: Fraction = Fraction(1, 5)
    scheduling_service_time: SimTime = Fraction(1, 20)
    batch_period: SimTime | None = Fraction(60)
    rebuild_delay: SimTime = Fraction(1)
    heartbeat_period: SimTime = Fraction(10)
    migration_period: SimTime = Fraction(5)
    thresholds: ProvisionThresholds = field(default_factory=ProvisionThresholds)
    restrict_cloud: bool = False
    max_sim_time: SimTime = Fraction(10**7)
