"""Execution engine: one deterministic run of one scenario part.

Wires the event kernel, the node environment, the workload, the monitoring
views, and the decision engine together.  The dispatcher is modeled as a
sequential resource: pending tasks are decided in atomic cycles, and when
scheduling accounting is on, a cycle of k decisions occupies the dispatcher
for k * service_time of simulated time before anything is dispatched.  That
makes the charged scheduling time equal, exactly, to the makespan shift it
causes on churn-free batch workloads.

Node execution is one task at a time, FIFO.  A task instance moves through
transfer -> queued -> running; replicas are full extra instances and the
first finisher wins.  Nodes fail silently: running and queued work is lost,
the input must be refetched from its original location on a re-run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .config import MAX_REPLICAS, PolicyParams, Toggles
from .dispatcher import (
    Dispatcher,
    JobProgress,
    PlacementMode,
    TaskRunState,
    compute_seconds,
    plan_aggregation,
    plan_replicas,
    provision_cloud,
    should_migrate,
)
from .environment import Environment, NodeClass, NodeSpec, transfer_time
from .errors import NoAvailableNode
from .simkernel import Event, EventKind, SimKernel, SimTime, ZERO, rng_stream
from .views import LogRecord, RecordKind, ViewStore
from .workload import (
    JobSpec,
    MicroBatcher,
    StreamEvent,
    StreamSource,
    TaskOrigin,
    TaskSpec,
    Workload,
    batch_to_task,
)


class TaskInstance:
    """One attempt to execute a task on one node."""

    __slots__ = (
        "run",
        "node_id",
        "role",
        "seq",
        "compute",
        "transfer_delay",
        "phase",
        "event_id",
        "started_at",
        "finish_at",
    )

    def __init__(self, run: "TaskRun", node_id: str, role: str, seq: int, compute: SimTime):
        self.run = run
        self.node_id = node_id
        self.role = role  # "primary" or "replica"
        self.seq = seq
        self.compute = compute
        self.transfer_delay: SimTime = ZERO
        self.phase = "transfer"  # transfer -> queued -> running -> done/failed/cancelled/migrated
        self.event_id: int | None = None
        self.started_at: SimTime | None = None
        self.finish_at: SimTime | None = None

    @property
    def label(self) -> str:
        return f"{self.run.task.id}#{self.seq}"

    def alive(self) -> bool:
        return self.phase in ("transfer", "queued", "running")


class TaskRun:
    """Logical task state across all its instances and re-runs."""

    def __init__(self, task: TaskSpec, kind: str, job_run: "JobRun | None" = None):
        self.task = task
        self.kind = kind  # "job", "stream", or "aggregation"
        self.job_run = job_run
        self.instances: list[TaskInstance] = []
        self.completed = False
        self.completion_time: SimTime | None = None
        self.winner: TaskInstance | None = None
        self.attempts = 0
        self.payload_origin = "Aggregate" if kind == "aggregation" else task.origin.value

    def next_seq(self) -> int:
        return len(self.instances)

    def alive_instances(self) -> list[TaskInstance]:
        return [inst for inst in self.instances if inst.alive()]

    def ever_assigned(self) -> bool:
        return self.completed or bool(self.instances and any(i.alive() for i in self.instances))


class JobRun:
    def __init__(self, job: JobSpec):
        self.job = job
        self.task_runs: list[TaskRun] = []
        self.finished = 0
        self.durations: list[SimTime] = []
        self.partials: dict[str, tuple[str, Fraction]] = {}  # task id -> (node, bytes)
        self.completion_time: SimTime | None = None
        self.started_at: SimTime = ZERO
        self.burst = False
        self.agg_run: TaskRun | None = None
        self.agg_deferred = False


class StreamRun:
    def __init__(self, source: StreamSource):
        self.source = source
        self.batcher = MicroBatcher(source.spec)
        self.batch_seq = 0
        self.timer_event: int | None = None
        self.timer_at: SimTime | None = None
        self.ended = False


@dataclass
class NodeRun:
    spec: NodeSpec
    running: TaskInstance | None = None
    queue: list[TaskInstance] = field(default_factory=list)
    in_transfer: set[TaskInstance] = field(default_factory=set)


@dataclass
class EngineResult:
    makespan: SimTime | None
    completed: bool
    overheads: dict[str, SimTime]
    counts: dict[str, int]
    job_completions: dict[str, SimTime]
    cost: Fraction
    views: ViewStore


class Engine:
    def __init__(
        self,
        env: Environment,
        workload: Workload,
        toggles: Toggles,
        mode: PlacementMode,
        params: PolicyParams,
        seed: int,
    ):
        self.env = env
        self.workload = workload
        self.toggles = toggles
        self.mode = mode
        self.params = params
        self.seed = seed

        self.kernel = SimKernel()
        self.views = ViewStore(nodes=env.nodes)
        self.dispatcher = Dispatcher(weights=params.weights, rating_floor=params.rating_floor)
        self.nodes: dict[str, NodeRun] = {nid: NodeRun(spec=spec) for nid, spec in env.nodes.items()}
        self._churn_rngs = {nid: rng_stream(seed, f"churn:{nid}") for nid in env.nodes}

        self.overheads: dict[str, SimTime] = {
            "scheduling": ZERO,
            "migration": ZERO,
            "replication": ZERO,
            "aggregation": ZERO,
        }
        self.counts = {"migrations": 0, "replicas": 0, "faults": 0, "recoveries": 0}
        self.cost: Fraction = ZERO

        self.job_runs: list[JobRun] = []
        self.stream_runs: list[StreamRun] = []
        self._pending: list[TaskRun] = []
        self._dispatcher_busy = False
        self._open_tasks = 0
        self._open_jobs = 0
        self._open_streams = 0
        self._finished = False
        self._makespan: SimTime | None = None
        self.stream_events_scheduled = 0
        self.stream_events_batched = 0

    # ------------------------------------------------------------------ log

    def _record(self, kind: RecordKind, subject: str, payload: dict | None = None) -> None:
        self.views.append(
            LogRecord(at=self.kernel.now(), subject=subject, kind=kind, payload=payload or {})
        )

    def _snapshot(self):
        now = self.kernel.now()
        queue_work: dict[str, Fraction] = {}
        queue_lengths: dict[str, int] = {}
        for nid, state in self.nodes.items():
            work = ZERO
            for inst in state.queue:
                work += inst.compute
            for inst in state.in_transfer:
                work += inst.compute
            length = len(state.queue)
            if state.running is not None:
                work += state.running.finish_at - now
                length += 1
            queue_work[nid] = work
            queue_lengths[nid] = length
        return self.views.snapshot(now, queue_work=queue_work, queue_lengths=queue_lengths)

    # ------------------------------------------------------------ lifecycle

    def run(self) -> EngineResult:
        self._initialize()
        self.kernel.run(stop=lambda: self._finished, horizon=self.params.max_sim_time)
        job_completions = {
            jr.job.id: jr.completion_time for jr in self.job_runs if jr.completion_time is not None
        }
        return EngineResult(
            makespan=self._makespan,
            completed=self._finished,
            overheads=dict(self.overheads),
            counts=dict(self.counts),
            job_completions=job_completions,
            cost=self.cost,
            views=self.views,
        )

    def _initialize(self) -> None:
        for nid in sorted(self.env.nodes):
            self._record(RecordKind.NODE_UP, nid)

        if self.toggles.churn:
            for nid in self.env.churning_nodes():
                trans = self.env.next_churn_transition(nid, self._churn_rngs[nid], ZERO)
                self.kernel.schedule(
                    Event(EventKind.NODE_DOWN, payload=nid, callback=self._on_node_down),
                    trans.at,
                )

        self.kernel.schedule(
            Event(EventKind.TIMER, callback=self._on_heartbeat), self.params.heartbeat_period
        )
        if self.params.batch_period is not None:
            self.kernel.schedule(
                Event(EventKind.BATCH_VIEW_REBUILD, callback=self._on_rebuild),
                self.params.batch_period,
            )

        for source in self.workload.streams:
            srun = StreamRun(source)
            self.stream_runs.append(srun)
            self._open_streams += 1
            for idx, at in enumerate(source.event_times):
                self.kernel.schedule(
                    Event(
                        EventKind.STREAM_EVENT,
                        payload=(srun, idx, at),
                        callback=self._on_stream_event,
                    ),
                    at,
                )
            self.stream_events_scheduled += len(source.event_times)
            self.kernel.schedule(
                Event(EventKind.TIMER, payload=srun, callback=self._on_stream_drain),
                source.duration,
            )
            self._sync_stream_timer(srun)

        for job in self.workload.jobs:
            jr = JobRun(job)
            self.job_runs.append(jr)
            self._open_jobs += 1
            for task in job.tasks:
                run = TaskRun(task, kind="job", job_run=jr)
                jr.task_runs.append(run)
                self._open_tasks += 1
                self._pending.append(run)
            if self.params.restrict_cloud:
                th = self.params.thresholds
                for at in (th.checkpoint_frac * th.deadline, th.grace):
                    self.kernel.schedule(
                        Event(EventKind.TIMER, payload=jr, callback=self._on_provision_check), at
                    )

        if self.toggles.migration:
            self.kernel.schedule(
                Event(EventKind.TIMER, callback=self._on_migration_tick),
                self.params.migration_period,
            )

        self._request_dispatch()

    def _check_done(self) -> None:
        if self._finished:
            return
        if self._open_tasks == 0 and self._open_jobs == 0 and self._open_streams == 0:
            self._finished = True
            self._makespan = self.kernel.now()

    # ------------------------------------------------------------- dispatch

    def _request_dispatch(self) -> None:
        if self._dispatcher_busy or not self._pending:
            return
        cycle = list(self._pending)
        self._pending.clear()
        self._dispatcher_busy = True
        cost = (
            len(cycle) * self.params.scheduling_service_time if self.toggles.scheduling else ZERO
        )
        self.kernel.schedule(
            Event(EventKind.TIMER, payload=(cycle, cost), callback=self._on_dispatch_complete),
            self.kernel.now() + cost,
        )

    def _candidates_for(self, run: TaskRun) -> list[str] | None:
        """Candidate node ids, or None for no restriction."""
        if not self.params.restrict_cloud or run.kind == "stream":
            return None
        if run.job_run is not None and run.job_run.burst:
            return None
        return [
            nid
            for nid, spec in self.env.nodes.items()
            if spec.node_class is NodeClass.GRID
        ]

    def _replica_count(self, available: int) -> int:
        if self.params.replicas == MAX_REPLICAS:
            return max(available - 1, 0)
        return int(self.params.replicas)

    def _on_dispatch_complete(self, ev: Event) -> None:
        cycle, cost = ev.payload
        self.overheads["scheduling"] += cost
        self._dispatcher_busy = False
        # anything in _pending right now arrived while this cycle was in
        # flight; tasks parked below (no candidate up) must not trigger a
        # fresh cycle by themselves or an empty environment would spin
        arrived_during_cycle = bool(self._pending)
        for run in cycle:
            if run.completed:
                continue
            candidates = self._candidates_for(run)
            pool = candidates if candidates is not None else list(self.env.nodes)
            if not any(self.env.availability[nid] for nid in pool):
                self._pending.append(run)
                continue
            snap = self._snapshot()
            placement = self.dispatcher.place([run.task], snap, self.mode, candidates=candidates)[0]
            run.attempts += 1
            self._launch_instance(run, placement.node_id, "primary")
            if self.toggles.replication and run.kind != "aggregation":
                r = self._replica_count(sum(1 for nid in pool if self.env.availability[nid]))
                if r > 0:
                    replicas = plan_replicas(
                        run.task, snap, r, placement.node_id, candidates=candidates
                    )
                    for rep_nid in replicas:
                        self._record(
                            RecordKind.REPLICATE,
                            run.task.id,
                            {"primary": placement.node_id, "replica": rep_nid},
                        )
                        self._launch_instance(run, rep_nid, "replica")
                        self.counts["replicas"] += 1
        if arrived_during_cycle and self._pending:
            self._request_dispatch()

    # ------------------------------------------------------------ instances

    def _launch_instance(
        self,
        run: TaskRun,
        node_id: str,
        role: str,
        input_from: str | None = "origin",
        transfer_delay: SimTime | None = None,
        compute_override: SimTime | None = None,
    ) -> TaskInstance:
        spec = self.env.node(node_id)
        compute = compute_override if compute_override is not None else compute_seconds(run.task, spec)
        inst = TaskInstance(run, node_id, role, run.next_seq(), compute)
        run.instances.append(inst)
        if transfer_delay is None:
            src_id = run.task.input_location if input_from == "origin" else input_from
            src = self.env.nodes.get(src_id) if src_id else None
            transfer_delay = transfer_time(run.task.input_size, src, spec)
        inst.transfer_delay = transfer_delay
        self.nodes[node_id].in_transfer.add(inst)
        inst.event_id = self.kernel.schedule(
            Event(EventKind.TIMER, payload=inst, callback=self._on_arrival),
            self.kernel.now() + transfer_delay,
        )
        return inst

    def _on_arrival(self, ev: Event) -> None:
        inst: TaskInstance = ev.payload
        state = self.nodes[inst.node_id]
        state.in_transfer.discard(inst)
        if inst.run.kind == "aggregation":
            # the parallel fetch of the partial results actually happened
            self.overheads["aggregation"] += inst.transfer_delay
        if not self.env.availability[inst.node_id]:
            self._fail_instance(inst, "transfer")
            self._recover([inst.run])
            return
        inst.phase = "queued"
        state.queue.append(inst)
        self._start_next(inst.node_id)

    def _start_next(self, node_id: str) -> None:
        state = self.nodes[node_id]
        if state.running is not None or not state.queue or not self.env.availability[node_id]:
            return
        inst = state.queue.pop(0)
        inst.phase = "running"
        now = self.kernel.now()
        inst.started_at = now
        inst.finish_at = now + inst.compute
        state.running = inst
        self.env.mark_running(node_id, inst.label)
        self._record(
            RecordKind.TASK_START,
            inst.run.task.id,
            {"node": node_id, "role": inst.role, "instance": inst.seq},
        )
        inst.event_id = self.kernel.schedule(
            Event(EventKind.TASK_FINISH, payload=inst, callback=self._on_finish), inst.finish_at
        )

    def _on_finish(self, ev: Event) -> None:
        inst: TaskInstance = ev.payload
        run = inst.run
        state = self.nodes[inst.node_id]
        state.running = None
        self.env.clear_running(inst.node_id, inst.label)
        now = self.kernel.now()
        consumed = now - inst.started_at
        self.cost += state.spec.cost_rate * consumed
        if run.completed:
            # a sibling won at this same instant; treat this copy as a loser
            inst.phase = "cancelled"
            if self.toggles.replication:
                self.overheads["replication"] += consumed
            self._start_next(inst.node_id)
            return
        inst.phase = "done"
        run.completed = True
        run.completion_time = now
        run.winner = inst
        self._record(
            RecordKind.TASK_FINISH,
            run.task.id,
            {
                "node": inst.node_id,
                "duration": consumed,
                "origin": run.payload_origin,
            },
        )
        for other in run.instances:
            if other is not inst and other.alive():
                self._cancel_instance(other)
        self._open_tasks -= 1
        if run.kind == "aggregation":
            self.overheads["aggregation"] += consumed
            jr = run.job_run
            jr.completion_time = now
            self._open_jobs -= 1
        elif run.kind == "job":
            jr = run.job_run
            jr.finished += 1
            jr.durations.append(consumed)
            jr.partials[run.task.id] = (inst.node_id, run.task.output_size)
            if self.params.restrict_cloud and not jr.burst:
                self._evaluate_provision(jr)
            if jr.finished == len(jr.job.tasks):
                if self.toggles.aggregation_accounting:
                    self._launch_aggregation(jr)
                else:
                    jr.completion_time = now
                    self._open_jobs -= 1
        self._start_next(inst.node_id)
        self._check_done()

    def _cancel_instance(self, inst: TaskInstance) -> None:
        """A sibling finished first: discard this copy wherever it stands."""
        self.kernel.cancel(inst.event_id)
        state = self.nodes[inst.node_id]
        if inst.phase == "transfer":
            state.in_transfer.discard(inst)
        elif inst.phase == "queued":
            state.queue.remove(inst)
        elif inst.phase == "running":
            now = self.kernel.now()
            consumed = now - inst.started_at
            self.cost += state.spec.cost_rate * consumed
            if self.toggles.replication:
                self.overheads["replication"] += consumed
            state.running = None
            self.env.clear_running(inst.node_id, inst.label)
            self._start_next(inst.node_id)
        inst.phase = "cancelled"

    def _fail_instance(self, inst: TaskInstance, phase_label: str) -> None:
        self.kernel.cancel(inst.event_id)
        state = self.nodes[inst.node_id]
        if inst.phase == "transfer":
            state.in_transfer.discard(inst)
        elif inst.phase == "queued":
            if inst in state.queue:
                state.queue.remove(inst)
        elif inst.phase == "running":
            consumed = self.kernel.now() - inst.started_at
            self.cost += state.spec.cost_rate * consumed
            if state.running is inst:
                state.running = None
            self.env.clear_running(inst.node_id, inst.label)
        inst.phase = "failed"
        self._record(RecordKind.TASK_FAIL, inst.run.task.id, {"node": inst.node_id, "phase": phase_label})
        self.counts["faults"] += 1

    def _recover(self, runs: list[TaskRun]) -> None:
        """Re-dispatch any task that lost its last alive instance."""
        seen = set()
        for run in runs:
            if id(run) in seen or run.completed or run.alive_instances():
                continue
            seen.add(id(run))
            self.counts["recoveries"] += 1
            if run.kind == "aggregation":
                self._relaunch_aggregation(run.job_run)
            else:
                self._pending.append(run)
        self._request_dispatch()

    # ---------------------------------------------------------------- churn

    def _on_node_down(self, ev: Event) -> None:
        nid = ev.payload
        now = self.kernel.now()
        self.env.on_node_down(nid, now)
        self._record(RecordKind.NODE_DOWN, nid)
        state = self.nodes[nid]
        victims: list[TaskInstance] = []
        if state.running is not None:
            victims.append(state.running)
        victims.extend(state.queue)
        for inst in victims:
            self._fail_instance(inst, "running" if inst.phase == "running" else "queued")
        state.queue.clear()
        trans = self.env.next_churn_transition(nid, self._churn_rngs[nid], now)
        self.kernel.schedule(
            Event(EventKind.NODE_UP, payload=nid, callback=self._on_node_up), trans.at
        )
        self._recover([inst.run for inst in victims])

    def _on_node_up(self, ev: Event) -> None:
        nid = ev.payload
        now = self.kernel.now()
        self.env.on_node_up(nid, now)
        self._record(RecordKind.NODE_UP, nid)
        trans = self.env.next_churn_transition(nid, self._churn_rngs[nid], now)
        self.kernel.schedule(
            Event(EventKind.NODE_DOWN, payload=nid, callback=self._on_node_down), trans.at
        )
        for jr in self.job_runs:
            if jr.agg_deferred:
                jr.agg_deferred = False
                self._relaunch_aggregation(jr)
        self._request_dispatch()

    # ------------------------------------------------------------ services

    def _on_heartbeat(self, ev: Event) -> None:
        for nid in sorted(self.env.nodes):
            if self.env.availability[nid]:
                self._record(RecordKind.HEARTBEAT, nid)
        self.kernel.schedule(
            Event(EventKind.TIMER, callback=self._on_heartbeat),
            self.kernel.now() + self.params.heartbeat_period,
        )

    def _on_rebuild(self, ev: Event) -> None:
        now = self.kernel.now()
        self.views.rebuild_batch_view(now)
        self.kernel.schedule(
            Event(EventKind.TIMER, callback=lambda _: self.views.commit_rebuild()),
            now + self.params.rebuild_delay,
        )
        self.kernel.schedule(
            Event(EventKind.BATCH_VIEW_REBUILD, callback=self._on_rebuild),
            now + self.params.batch_period,
        )

    def _on_migration_tick(self, ev: Event) -> None:
        now = self.kernel.now()
        for nid in sorted(self.env.nodes):
            if not self.env.availability[nid]:
                continue
            state = self.nodes[nid]
            lineup: list[TaskInstance] = []
            if state.running is not None:
                lineup.append(state.running)
            lineup.extend(list(state.queue))
            ahead = ZERO
            for inst in lineup:
                if inst.phase == "running":
                    remaining = inst.finish_at - now
                    ahead = remaining
                elif inst.phase == "queued":
                    remaining = ahead + inst.compute
                    ahead += inst.compute
                else:
                    continue
                if inst.run.completed or inst.run.kind == "aggregation" or inst.role != "primary":
                    continue
                decision = should_migrate(
                    TaskRunState(task=inst.run.task, node_id=nid, remaining_current=remaining),
                    self._snapshot(),
                    self.params.hysteresis,
                    candidates=self._migration_candidates(inst),
                )
                if not decision.stay:
                    self._apply_migration(inst, decision)
        self.kernel.schedule(
            Event(EventKind.TIMER, callback=self._on_migration_tick),
            now + self.params.migration_period,
        )

    def _migration_candidates(self, inst: TaskInstance) -> list[str]:
        """Allowed targets: the usual candidate pool minus nodes hosting siblings."""
        base = self._candidates_for(inst.run)
        pool = base if base is not None else list(self.env.nodes)
        taken = {other.node_id for other in inst.run.instances if other.alive()}
        return [nid for nid in pool if nid not in taken]

    def _apply_migration(self, inst: TaskInstance, decision) -> None:
        run = inst.run
        src = inst.node_id
        dst = decision.target
        state = self.nodes[src]
        self.kernel.cancel(inst.event_id)
        if inst.phase == "queued" and inst in state.queue:
            state.queue.remove(inst)
        elif inst.phase == "running":
            # progress is abandoned; the task restarts from scratch on the target
            consumed = self.kernel.now() - inst.started_at
            self.cost += state.spec.cost_rate * consumed
            state.running = None
            self.env.clear_running(src, inst.label)
        inst.phase = "migrated"
        move = transfer_time(run.task.input_size, self.env.node(src), self.env.node(dst))
        self.overheads["migration"] += move
        self.counts["migrations"] += 1
        self._record(
            RecordKind.MIGRATE,
            run.task.id,
            {
                "from": src,
                "to": dst,
                "remaining": decision.remaining_current,
                "alternative": decision.best_alternative,
                "move_bytes": run.task.input_size,
            },
        )
        new_inst = TaskInstance(
            run, dst, inst.role, run.next_seq(), compute_seconds(run.task, self.env.node(dst))
        )
        run.instances.append(new_inst)
        new_inst.transfer_delay = move
        self.nodes[dst].in_transfer.add(new_inst)
        new_inst.event_id = self.kernel.schedule(
            Event(EventKind.TIMER, payload=new_inst, callback=self._on_arrival),
            self.kernel.now() + move,
        )
        self._start_next(src)

    def _evaluate_provision(self, jr: JobRun) -> None:
        assigned = sum(1 for tr in jr.task_runs if tr.ever_assigned())
        progress = JobProgress(
            job_id=jr.job.id,
            started_at=jr.started_at,
            total_tasks=len(jr.job.tasks),
            completed=jr.finished,
            assigned=assigned,
            finished_durations=tuple(jr.durations),
        )
        decision = provision_cloud(progress, self.params.thresholds, self.kernel.now())
        if decision is not None:
            jr.burst = True
            self._request_dispatch()

    def _on_provision_check(self, ev: Event) -> None:
        jr: JobRun = ev.payload
        if self.params.restrict_cloud and not jr.burst and jr.completion_time is None:
            self._evaluate_provision(jr)

    # ------------------------------------------------------------ aggregation

    def _launch_aggregation(self, jr: JobRun) -> None:
        snap = self._snapshot()
        candidates = self._candidates_for_aggregation(jr)
        partials = [jr.partials[t.id] for t in jr.job.tasks]
        try:
            placement = plan_aggregation(jr.job, snap, partials, candidates=candidates)
        except NoAvailableNode:
            jr.agg_deferred = True
            return
        est = placement.estimate
        self._record(
            RecordKind.AGGREGATE,
            jr.job.id,
            {
                "node": placement.node_id,
                "transfer": est.transfer_in,
                "compute": est.compute,
                "partials": len(partials),
            },
        )
        if jr.agg_run is None:
            agg_task = TaskSpec(
                id=f"{jr.job.id}/aggregate",
                job_id=jr.job.id,
                compute_cost=Fraction(1),
                input_size=ZERO,
                output_size=jr.job.aggregation_output_size,
                origin=TaskOrigin.BATCH,
            )
            jr.agg_run = TaskRun(agg_task, kind="aggregation", job_run=jr)
            self._open_tasks += 1
        self._launch_instance(
            jr.agg_run,
            placement.node_id,
            "primary",
            transfer_delay=est.transfer_in,
            compute_override=est.compute,
        )

    def _candidates_for_aggregation(self, jr: JobRun) -> list[str] | None:
        if not self.params.restrict_cloud or jr.burst:
            return None
        return [nid for nid, spec in self.env.nodes.items() if spec.node_class is NodeClass.GRID]

    def _relaunch_aggregation(self, jr: JobRun) -> None:
        if jr.completion_time is None:
            self._launch_aggregation(jr)

    # --------------------------------------------------------------- streams

    def _sync_stream_timer(self, srun: StreamRun) -> None:
        want = None if srun.ended else srun.batcher.next_timer_at
        if want == srun.timer_at:
            return
        if srun.timer_event is not None:
            self.kernel.cancel(srun.timer_event)
            srun.timer_event = None
        srun.timer_at = want
        if want is not None:
            srun.timer_event = self.kernel.schedule(
                Event(EventKind.TIMER, payload=srun, callback=self._on_window_timer), want
            )

    def _on_stream_event(self, ev: Event) -> None:
        srun, idx, at = ev.payload
        event = StreamEvent(
            source_id=srun.source.spec.id, index=idx, at=at, size=srun.source.spec.event_size
        )
        batch = srun.batcher.offer_event(event, self.kernel.now())
        if batch is not None:
            self._emit_stream_task(srun, batch)
        self._sync_stream_timer(srun)

    def _on_window_timer(self, ev: Event) -> None:
        srun: StreamRun = ev.payload
        srun.timer_event = None
        srun.timer_at = None
        if srun.ended:
            return
        batch = srun.batcher.on_window_timer(self.kernel.now())
        if batch is not None:
            self._emit_stream_task(srun, batch)
        self._sync_stream_timer(srun)

    def _on_stream_drain(self, ev: Event) -> None:
        srun: StreamRun = ev.payload
        batch = srun.batcher.drain(self.kernel.now())
        if batch is not None:
            self._emit_stream_task(srun, batch)
        srun.ended = True
        self._sync_stream_timer(srun)
        self._open_streams -= 1
        self._check_done()

    def _emit_stream_task(self, srun: StreamRun, batch) -> None:
        task = batch_to_task(batch, srun.source.spec, seq=srun.batch_seq)
        srun.batch_seq += 1
        self.stream_events_batched += len(batch.events)
        run = TaskRun(task, kind="stream")
        self._open_tasks += 1
        self._pending.append(run)
        self._request_dispatch()
