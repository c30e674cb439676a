"""Workload model: batch jobs plus micro-batched event streams.

A job is a bag of batch tasks with a final aggregation step.  A stream
source emits small events at a configured rate; a per-source micro-batcher
groups them into batches by time window, count, or both, and each batch
becomes an ordinary task whose cost grows linearly with the event count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .errors import EmptyBatch, InvalidSpec
from .simkernel import SimTime, ZERO, RngStream, as_time


class TaskOrigin(Enum):
    BATCH = "Batch"
    MICRO_BATCH = "MicroBatch"


@dataclass(frozen=True)
class TaskSpec:
    id: str
    job_id: str
    compute_cost: Fraction  # flops
    input_size: Fraction  # bytes
    output_size: Fraction  # bytes
    origin: TaskOrigin
    input_location: str | None = None  # node id, or None for the ingress


@dataclass(frozen=True)
class JobSpec:
    """A set of tasks whose results must be grouped by one aggregation step.

    The job is complete only when every task and the aggregation have run.
    """

    id: str
    tasks: tuple[TaskSpec, ...]
    aggregation_output_size: Fraction = ZERO


class BatchingMode(Enum):
    TIME_BASED = "time-based"
    COUNT_BASED = "count-based"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class BatchingPolicy:
    mode: BatchingMode
    window: SimTime | None = None  # required for time-based and hybrid
    max_count: int | None = None  # required for count-based and hybrid

    def __post_init__(self):
        needs_window = self.mode in (BatchingMode.TIME_BASED, BatchingMode.HYBRID)
        needs_count = self.mode in (BatchingMode.COUNT_BASED, BatchingMode.HYBRID)
        if needs_window and (self.window is None or self.window <= 0):
            raise InvalidSpec("policy.window", "must be > 0 for time-based and hybrid batching")
        if needs_count and (self.max_count is None or self.max_count < 1):
            raise InvalidSpec("policy.max_count", "must be >= 1 for count-based and hybrid batching")


@dataclass(frozen=True)
class StreamSourceSpec:
    id: str
    rate: Fraction  # events per second
    event_size: Fraction  # bytes per event
    cost_per_event: Fraction  # flops per event
    policy: BatchingPolicy


@dataclass(frozen=True)
class StreamEvent:
    source_id: str
    index: int
    at: SimTime
    size: Fraction


@dataclass(frozen=True)
class MicroBatch:
    """A non-empty group of one source's events, closed at ``created_at``."""

    events: tuple[StreamEvent, ...]
    created_at: SimTime
    source_id: str


class MicroBatcher:
    """State machine grouping one source's events into micro-batches.

    Count triggers fire inside :meth:`offer_event`; window triggers fire in
    :meth:`on_window_timer`.  The window timer re-arms from every flush (and
    from every timer tick, so boundaries stay regular when traffic pauses).
    Empty batches are never produced.
    """

    def __init__(self, source: StreamSourceSpec, start: SimTime = ZERO):
        self.source = source
        self._buffer: list[StreamEvent] = []
        self._last_flush: SimTime = as_time(start)
        self._closed = False
        self.flushed = 0  # batches produced so far

    @property
    def buffered(self) -> int:
        return len(self._buffer)

    @property
    def next_timer_at(self) -> SimTime | None:
        """When the window timer should fire next, or None if no timer applies."""
        if self._closed or self.source.policy.mode is BatchingMode.COUNT_BASED:
            return None
        return self._last_flush + self.source.policy.window

    def offer_event(self, event: StreamEvent, now) -> MicroBatch | None:
        """Buffer one event; flush exactly when a count threshold is reached."""
        now = as_time(now)
        self._buffer.append(event)
        policy = self.source.policy
        if policy.mode in (BatchingMode.COUNT_BASED, BatchingMode.HYBRID):
            if len(self._buffer) >= policy.max_count:
                return self._flush(now)
        return None

    def on_window_timer(self, now) -> MicroBatch | None:
        """Window elapsed: flush whatever is buffered, or nothing if empty."""
        now = as_time(now)
        if self._buffer:
            return self._flush(now)
        self._last_flush = now  # keep boundaries regular across idle windows
        return None

    def drain(self, now) -> MicroBatch | None:
        """End of stream: flush any partial buffer and close the batcher."""
        now = as_time(now)
        batch = self._flush(now) if self._buffer else None
        self._closed = True
        return batch

    def _flush(self, now: SimTime) -> MicroBatch:
        batch = MicroBatch(events=tuple(self._buffer), created_at=now, source_id=self.source.id)
        self._buffer = []
        self._last_flush = now
        self.flushed += 1
        return batch


def batch_to_task(batch: MicroBatch, source: StreamSourceSpec, seq: int = 0) -> TaskSpec:
    """Convert a micro-batch into a schedulable task.

    Cost and input size scale linearly with the event count; the batch's
    input sits at the ingress until placement moves it.
    """
    n = len(batch.events)
    if n == 0:
        raise EmptyBatch(f"micro-batch from {batch.source_id} has no events")
    return TaskSpec(
        id=f"{source.id}-mb{seq}",
        job_id=f"stream:{source.id}",
        compute_cost=source.cost_per_event * n,
        input_size=source.event_size * n,
        output_size=ZERO,
        origin=TaskOrigin.MICRO_BATCH,
        input_location=None,
    )


@dataclass
class StreamSource:
    """A generated stream: its spec plus the pre-drawn event schedule."""

    spec: StreamSourceSpec
    duration: SimTime
    event_times: tuple[SimTime, ...]
    arrivals: str = "poisson"  # or "deterministic"


@dataclass
class Workload:
    jobs: list[JobSpec]
    streams: list[StreamSource]

    def task_count(self) -> int:
        return sum(len(j.tasks) for j in self.jobs)


def _parse_dist(raw, path: str) -> dict:
    if isinstance(raw, (int, float, str)):
        return {"dist": "fixed", "value": Fraction(str(raw))}
    if not isinstance(raw, dict) or "dist" not in raw:
        raise InvalidSpec(path, "expected a number or {dist: fixed|uniform, ...}")
    kind = raw["dist"]
    try:
        if kind == "fixed":
            return {"dist": "fixed", "value": Fraction(str(raw["value"]))}
        if kind == "uniform":
            lo, hi = Fraction(str(raw["min"])), Fraction(str(raw["max"]))
            if hi < lo:
                raise InvalidSpec(path, "uniform needs min <= max")
            return {"dist": "uniform", "min": lo, "max": hi}
    except KeyError as exc:
        raise InvalidSpec(path, f"missing field {exc.args[0]!r}") from None
    raise InvalidSpec(path, f"unknown distribution {kind!r}")


def _draw(dist: dict, rng: RngStream) -> Fraction:
    if dist["dist"] == "fixed":
        return dist["value"]
    lo, hi = dist["min"], dist["max"]
    if lo == hi:
        return lo
    return Fraction(rng.uniform(float(lo), float(hi)))


def parse_batching_policy(raw: dict, path: str) -> BatchingPolicy:
    if not isinstance(raw, dict):
        raise InvalidSpec(path, "policy must be a mapping")
    try:
        mode = BatchingMode(raw.get("mode"))
    except ValueError:
        raise InvalidSpec(f"{path}.mode", f"unknown batching mode {raw.get('mode')!r}") from None
    window = as_time(raw["window"]) if "window" in raw else None
    max_count = raw.get("max_count")
    if max_count is not None and not isinstance(max_count, int):
        raise InvalidSpec(f"{path}.max_count", "must be an integer")
    return BatchingPolicy(mode=mode, window=window, max_count=max_count)


def generate_workload(spec: dict, rng: RngStream) -> Workload:
    """Materialize a workload description into concrete jobs and streams.

    Batch task costs and sizes come from per-job distributions; stream event
    times are drawn up front (Poisson arrivals, or exact 1/rate spacing in
    deterministic mode) so every scenario part sees the same schedule.
    """
    if not isinstance(spec, dict):
        raise InvalidSpec("workload", "description must be a mapping")

    jobs: list[JobSpec] = []
    seen_jobs: set[str] = set()
    for i, raw in enumerate(spec.get("jobs", []) or []):
        path = f"jobs[{i}]"
        job_id = raw.get("id")
        if not job_id or not isinstance(job_id, str):
            raise InvalidSpec(f"{path}.id", "missing or empty job id")
        if job_id in seen_jobs:
            raise InvalidSpec(f"{path}.id", f"duplicate job id {job_id!r}")
        seen_jobs.add(job_id)
        count = raw.get("tasks")
        if not isinstance(count, int) or count < 1:
            raise InvalidSpec(f"{path}.tasks", "task count must be an integer >= 1")
        cost = _parse_dist(raw.get("cost"), f"{path}.cost")
        input_size = _parse_dist(raw.get("input_size", 0), f"{path}.input_size")
        output_size = _parse_dist(raw.get("output_size", 0), f"{path}.output_size")
        location = raw.get("input_location", "ingress")
        location = None if location in (None, "ingress") else str(location)
        agg_out = Fraction(str(raw.get("aggregation_output_size", 0)))
        if agg_out < 0:
            raise InvalidSpec(f"{path}.aggregation_output_size", "must be >= 0")
        tasks = []
        for k in range(count):
            cost_k = _draw(cost, rng)
            if cost_k <= 0:
                raise InvalidSpec(f"{path}.cost", "compute cost must be > 0")
            tasks.append(
                TaskSpec(
                    id=f"{job_id}-t{k}",
                    job_id=job_id,
                    compute_cost=cost_k,
                    input_size=_draw(input_size, rng),
                    output_size=_draw(output_size, rng),
                    origin=TaskOrigin.BATCH,
                    input_location=location,
                )
            )
        jobs.append(JobSpec(id=job_id, tasks=tuple(tasks), aggregation_output_size=agg_out))

    streams: list[StreamSource] = []
    seen_streams: set[str] = set()
    for i, raw in enumerate(spec.get("streams", []) or []):
        path = f"streams[{i}]"
        sid = raw.get("id")
        if not sid or not isinstance(sid, str):
            raise InvalidSpec(f"{path}.id", "missing or empty stream id")
        if sid in seen_streams:
            raise InvalidSpec(f"{path}.id", f"duplicate stream id {sid!r}")
        seen_streams.add(sid)
        rate = Fraction(str(raw.get("rate", 0)))
        if rate <= 0:
            raise InvalidSpec(f"{path}.rate", "event rate must be > 0")
        event_size = Fraction(str(raw.get("event_size", 0)))
        if event_size <= 0:
            raise InvalidSpec(f"{path}.event_size", "event size must be > 0")
        cost_per_event = Fraction(str(raw.get("cost_per_event", 0)))
        if cost_per_event < 0:
            raise InvalidSpec(f"{path}.cost_per_event", "must be >= 0")
        duration = as_time(raw.get("duration", 0))
        if duration <= 0:
            raise InvalidSpec(f"{path}.duration", "stream duration must be > 0")
        arrivals = raw.get("arrivals", "poisson")
        if arrivals not in ("poisson", "deterministic"):
            raise InvalidSpec(f"{path}.arrivals", f"unknown arrival process {arrivals!r}")
        policy = parse_batching_policy(raw.get("policy"), f"{path}.policy")

        times: list[SimTime] = []
        t = ZERO
        if arrivals == "deterministic":
            step = Fraction(1) / rate
            t = step
            while t <= duration:
                times.append(t)
                t += step
        else:
            lam = float(rate)
            t = ZERO
            while True:
                t = t + Fraction(rng.expovariate(lam))
                if t > duration:
                    break
                times.append(t)
        streams.append(
            StreamSource(
                spec=StreamSourceSpec(
                    id=sid,
                    rate=rate,
                    event_size=event_size,
                    cost_per_event=cost_per_event,
                    policy=policy,
                ),
                duration=duration,
                event_times=tuple(times),
                arrivals=arrivals,
            )
        )

    if not jobs and not streams:
        raise InvalidSpec("workload", "needs at least one job or stream")
    return Workload(jobs=jobs, streams=streams)
