"""Decision engine: rating, time estimation, placement, migration,
replication, cloud provisioning, and aggregation placement.

Every rule is a pure function over an immutable :class:`EnvSnapshot`; the
only state anywhere is the round-robin cursor of the Baseline policy, held
by :class:`Dispatcher`.  All arithmetic is exact rational, which makes the
spec-level invariants (argmax invariance under capacity scaling, strict
hysteresis comparisons, analytic-estimate equality with the simulated
pipeline) checkable with ``==``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .environment import NodeClass, NodeSpec, transfer_time
from .errors import InvalidConfig, JobIncomplete, NoAvailableNode
from .simkernel import SimTime, ZERO, as_time
from .views import EnvSnapshot
from .workload import JobSpec, TaskSpec

ONE = Fraction(1)


class PlacementMode(Enum):
    BASELINE = "baseline"
    SMART = "smart"


@dataclass(frozen=True)
class RatingWeights:
    """Convex-combination weights over the five rating components."""

    w_cpu: Fraction
    w_mem: Fraction
    w_io: Fraction
    w_net: Fraction
    w_hist: Fraction

    def __post_init__(self):
        total = self.w_cpu + self.w_mem + self.w_io + self.w_net + self.w_hist
        if total != 1:
            raise InvalidConfig(f"rating weights must sum to 1, got {total}")
        for name in ("w_cpu", "w_mem", "w_io", "w_net", "w_hist"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be >= 0")

    @classmethod
    def normalized(cls, cpu, mem, io, net, hist) -> "RatingWeights":
        """Build weights from raw non-negative values, normalizing the sum to 1."""
        raw = [Fraction(str(v)) for v in (cpu, mem, io, net, hist)]
        if any(v < 0 for v in raw):
            raise InvalidConfig("rating weights must be >= 0")
        total = sum(raw)
        if total <= 0:
            raise InvalidConfig("rating weights must not all be zero")
        return cls(*(v / total for v in raw))


#: Emphasis on cpu, network, and history; memory matters least.
DEFAULT_WEIGHTS = RatingWeights(
    w_cpu=Fraction(1, 4),
    w_mem=Fraction(1, 10),
    w_io=Fraction(3, 20),
    w_net=Fraction(1, 4),
    w_hist=Fraction(1, 4),
)


@dataclass(frozen=True)
class Rating:
    node_id: str
    score: Fraction
    components: dict[str, Fraction]


@dataclass(frozen=True)
class TimeEstimate:
    """Analytic completion-time estimate for one task on one node.

    ``total`` is always the sum of the four parts.  ``transfer_out`` is zero
    in the current cost model: results stay on the worker until aggregation
    moves them, and the output write is already charged inside ``compute``.
    """

    task_id: str
    node_id: str
    transfer_in: SimTime
    queue_wait: SimTime
    compute: SimTime
    transfer_out: SimTime

    @property
    def total(self) -> SimTime:
        return self.transfer_in + self.queue_wait + self.compute + self.transfer_out


@dataclass(frozen=True)
class Placement:
    task_id: str
    node_id: str
    decided_at: SimTime
    estimate: TimeEstimate | None = None
    replicas: tuple[str, ...] = ()


@dataclass(frozen=True)
class ProvisionThresholds:
    """Cloud-bursting control knobs.

    completion_c: minimum completed fraction expected at the checkpoint.
    checkpoint_frac: where the checkpoint sits, as a fraction of the deadline.
    assignment_a: tolerated unassigned fraction once the grace period passed.
    variance_v: tolerated coefficient of variation of finished durations.
    """

    completion_c: Fraction = Fraction(1, 2)
    checkpoint_frac: Fraction = Fraction(1, 2)
    assignment_a: Fraction = Fraction(1, 2)
    grace: SimTime = Fraction(30)
    variance_v: Fraction = ONE
    deadline: SimTime = Fraction(600)

    def __post_init__(self):
        for name in ("completion_c", "checkpoint_frac", "assignment_a"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise InvalidConfig(f"{name} must be in (0, 1], got {v}")
        if self.grace < 0 or self.deadline <= 0:
            raise InvalidConfig("grace must be >= 0 and deadline > 0")


class BurstReason(Enum):
    COMPLETION = "completion"
    ASSIGNMENT = "assignment"
    VARIANCE = "variance"


@dataclass(frozen=True)
class BurstDecision:
    reason: BurstReason


@dataclass(frozen=True)
class MigrationDecision:
    stay: bool
    target: str | None = None
    remaining_current: SimTime | None = None
    best_alternative: SimTime | None = None


@dataclass(frozen=True)
class TaskRunState:
    """What the migration rule needs to know about a live task."""

    task: TaskSpec
    node_id: str
    remaining_current: SimTime  # queue ahead plus remaining compute


@dataclass(frozen=True)
class JobProgress:
    job_id: str
    started_at: SimTime
    total_tasks: int
    completed: int
    assigned: int
    finished_durations: tuple[SimTime, ...] = ()


def compute_seconds(task: TaskSpec, node: NodeSpec) -> SimTime:
    """On-node time: crunch the flops, read the input, write the output."""
    return task.compute_cost / node.cpu_speed + task.input_size / node.io_rate + task.output_size / node.io_rate


def rate_node(snapshot: EnvSnapshot, node: NodeSpec, weights: RatingWeights = DEFAULT_WEIGHTS) -> Rating:
    """Score a node in [0, 1]: capacities normalized over known nodes, plus history.

    The history component is success rate times availability fraction and
    defaults to 1 when nothing has been observed yet, so unknown nodes are
    treated optimistically.
    """
    known = list(snapshot.nodes.values()) or [node]
    max_cpu = max(spec.cpu_speed for spec in known)
    max_mem = max(spec.memory for spec in known)
    max_io = max(spec.io_rate for spec in known)
    max_net = max(spec.link_bw for spec in known)
    stats = snapshot.stats.get(node.id)
    if stats is None:
        hist = ONE
    else:
        hist = stats.success_rate * stats.availability_fraction
    components = {
        "cpu": node.cpu_speed / max_cpu,
        "mem": node.memory / max_mem,
        "io": node.io_rate / max_io,
        "net": node.link_bw / max_net,
        "hist": hist,
    }
    score = (
        weights.w_cpu * components["cpu"]
        + weights.w_mem * components["mem"]
        + weights.w_io * components["io"]
        + weights.w_net * components["net"]
        + weights.w_hist * components["hist"]
    )
    return Rating(node_id=node.id, score=score, components=components)


def _estimate(task: TaskSpec, node: NodeSpec, snapshot: EnvSnapshot, queue_work: dict) -> TimeEstimate:
    src = snapshot.nodes.get(task.input_location) if task.input_location else None
    return TimeEstimate(
        task_id=task.id,
        node_id=node.id,
        transfer_in=transfer_time(task.input_size, src, node),
        queue_wait=queue_work.get(node.id, ZERO),
        compute=compute_seconds(task, node),
        transfer_out=ZERO,
    )


def estimate_time(task: TaskSpec, node: NodeSpec, snapshot: EnvSnapshot) -> TimeEstimate:
    """Analytic estimate; on an idle, churn-free node it equals the simulated
    completion time exactly, not approximately."""
    return _estimate(task, node, snapshot, snapshot.queue_work)


def _available_candidates(snapshot: EnvSnapshot, candidates: list[str] | None) -> list[str]:
    pool = candidates if candidates is not None else list(snapshot.nodes)
    return sorted(nid for nid in pool if snapshot.availability.get(nid, True) and nid in snapshot.nodes)


class Dispatcher:
    """Placement front-end.  Holds the Baseline round-robin cursor.

    The cursor is a global counter over the sorted candidate list, so the
    Baseline policy keeps alternating across calls and across node churn.
    """

    def __init__(self, weights: RatingWeights = DEFAULT_WEIGHTS, rating_floor: Fraction = ZERO):
        self.weights = weights
        self.rating_floor = rating_floor
        self._rr_cursor = 0

    def place(
        self,
        tasks: list[TaskSpec],
        snapshot: EnvSnapshot,
        mode: PlacementMode,
        candidates: list[str] | None = None,
    ) -> list[Placement]:
        """Choose a node for each task.

        Baseline: round-robin over available nodes in id order.  Smart: among
        nodes whose rating clears the floor, pick the minimum estimated total;
        ties break toward the higher rating, then the lower node id.  Work
        already assigned earlier in the same call counts toward queue waits.
        """
        pool = _available_candidates(snapshot, candidates)
        if not pool:
            raise NoAvailableNode("no node is currently available")
        if mode is PlacementMode.BASELINE:
            placements = []
            for task in tasks:
                node_id = pool[self._rr_cursor % len(pool)]
                self._rr_cursor += 1
                placements.append(
                    Placement(task_id=task.id, node_id=node_id, decided_at=snapshot.as_of)
                )
            return placements

        ratings = {nid: rate_node(snapshot, snapshot.nodes[nid], self.weights) for nid in pool}
        eligible = [nid for nid in pool if ratings[nid].score >= self.rating_floor]
        if not eligible:
            eligible = pool  # a floor that filters everyone must not strand work
        overlay = dict(snapshot.queue_work)
        placements = []
        for task in tasks:
            best = None
            for nid in eligible:
                est = _estimate(task, snapshot.nodes[nid], snapshot, overlay)
                key = (est.total, -ratings[nid].score, nid)
                if best is None or key < best[0]:
                    best = (key, est)
            est = best[1]
            overlay[est.node_id] = overlay.get(est.node_id, ZERO) + est.compute
            placements.append(
                Placement(
                    task_id=task.id,
                    node_id=est.node_id,
                    decided_at=snapshot.as_of,
                    estimate=est,
                )
            )
        return placements


def should_migrate(
    state: TaskRunState,
    snapshot: EnvSnapshot,
    hysteresis: Fraction,
    candidates: list[str] | None = None,
) -> MigrationDecision:
    """Move a live task only for a clear win.

    The alternative cost on a candidate is a fresh estimate whose input
    transfer is the cost of moving the task's input bytes from the node that
    currently holds them; migration restarts the task, so no other state
    moves.  The rule is strict: migrate iff
    remaining_current > best_alternative * (1 + hysteresis).
    """
    pool = [nid for nid in _available_candidates(snapshot, candidates) if nid != state.node_id]
    if not pool:
        return MigrationDecision(stay=True, remaining_current=state.remaining_current)
    moved = TaskSpec(
        id=state.task.id,
        job_id=state.task.job_id,
        compute_cost=state.task.compute_cost,
        input_size=state.task.input_size,
        output_size=state.task.output_size,
        origin=state.task.origin,
        input_location=state.node_id,
    )
    ratings = {nid: rate_node(snapshot, snapshot.nodes[nid]) for nid in pool}
    best = None
    for nid in pool:
        est = estimate_time(moved, snapshot.nodes[nid], snapshot)
        key = (est.total, -ratings[nid].score, nid)
        if best is None or key < best[0]:
            best = (key, est)
    alternative = best[1]
    threshold = alternative.total * (ONE + hysteresis)
    if state.remaining_current > threshold:
        return MigrationDecision(
            stay=False,
            target=alternative.node_id,
            remaining_current=state.remaining_current,
            best_alternative=alternative.total,
        )
    return MigrationDecision(
        stay=True,
        remaining_current=state.remaining_current,
        best_alternative=alternative.total,
    )


def plan_replicas(
    task: TaskSpec,
    snapshot: EnvSnapshot,
    count: int,
    primary: str,
    candidates: list[str] | None = None,
) -> tuple[str, ...]:
    """Pick replica hosts for a grid-placed task.

    Cloud primaries are stable, so they get no replicas.  Otherwise the
    ``count`` highest-rated available nodes distinct from the primary are
    chosen, clamped to what exists.  First finisher wins at run time.
    """
    if count < 0:
        raise InvalidConfig("replica count must be >= 0")
    primary_spec = snapshot.nodes[primary]
    if primary_spec.node_class is NodeClass.CLOUD or count == 0:
        return ()
    pool = [nid for nid in _available_candidates(snapshot, candidates) if nid != primary]
    ranked = sorted(pool, key=lambda nid: (-rate_node(snapshot, snapshot.nodes[nid]).score, nid))
    return tuple(ranked[:count])


def provision_cloud(
    progress: JobProgress,
    thresholds: ProvisionThresholds,
    now,
) -> BurstDecision | None:
    """Decide whether a job should start using cloud nodes.

    Three triggers, checked in order: completion shortfall at the deadline
    checkpoint, leftover unassigned tasks after the grace period, and high
    variance among finished task durations.  The variance comparison avoids
    the square root: CV > v iff n*sumsq - sum^2 > (v*sum)^2 / ... is reduced
    to exact rational arithmetic on the population variance.
    """
    now = as_time(now)
    elapsed = now - progress.started_at
    total = progress.total_tasks
    if total > 0:
        if elapsed >= thresholds.checkpoint_frac * thresholds.deadline:
            if Fraction(progress.completed, total) < thresholds.completion_c:
                return BurstDecision(BurstReason.COMPLETION)
        if elapsed >= thresholds.grace:
            unassigned = total - progress.assigned
            if Fraction(unassigned, total) > thresholds.assignment_a:
                return BurstDecision(BurstReason.ASSIGNMENT)
    durations = progress.finished_durations
    n = len(durations)
    if n >= 2:
        total_d = sum(durations, ZERO)
        if total_d > 0:
            sumsq = sum((d * d for d in durations), ZERO)
            mean = total_d / n
            variance = sumsq / n - mean * mean
            # CV > v  <=>  variance > (v * mean)^2, all exact
            if variance > (thresholds.variance_v * mean) ** 2:
                return BurstDecision(BurstReason.VARIANCE)
    return None


def aggregation_compute_seconds(job: JobSpec, partial_bytes: Fraction, node: NodeSpec) -> SimTime:
    """On-node cost of grouping: read every partial, write the merged result."""
    return partial_bytes / node.io_rate + job.aggregation_output_size / node.io_rate


def plan_aggregation(
    job: JobSpec,
    snapshot: EnvSnapshot,
    partials: list[tuple[str, Fraction]],
    candidates: list[str] | None = None,
) -> Placement:
    """Place the aggregation step where it finishes soonest.

    Partials transfer in parallel, so the arrival term is the slowest single
    transfer; candidates are scored by that plus the aggregation compute
    time, with rating-then-id tie-breaking.  Requires every task finished.
    """
    if len(partials) != len(job.tasks):
        raise JobIncomplete(
            f"job {job.id} has {len(job.tasks) - len(partials)} unfinished tasks"
        )
    pool = _available_candidates(snapshot, candidates)
    if not pool:
        raise NoAvailableNode("no node is available for aggregation")
    total_bytes = sum((size for _, size in partials), ZERO)
    ratings = {nid: rate_node(snapshot, snapshot.nodes[nid]) for nid in pool}
    best = None
    for nid in pool:
        node = snapshot.nodes[nid]
        slowest = ZERO
        for holder, size in partials:
            t = transfer_time(size, snapshot.nodes.get(holder), node)
            if t > slowest:
                slowest = t
        compute = aggregation_compute_seconds(job, total_bytes, node)
        cost = slowest + compute
        key = (cost, -ratings[nid].score, nid)
        if best is None or key < best[0]:
            est = TimeEstimate(
                task_id=f"{job.id}/aggregate",
                node_id=nid,
                transfer_in=slowest,
                queue_wait=ZERO,
                compute=compute,
                transfer_out=ZERO,
            )
            best = (key, est)
    est = best[1]
    return Placement(
        task_id=est.task_id,
        node_id=est.node_id,
        decided_at=snapshot.as_of,
        estimate=est,
    )
