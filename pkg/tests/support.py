"""Shared test helpers: independent oracles and tiny builders.

The oracles here are deliberately written in a different shape than the
production code (plain lists and second passes instead of incremental
accumulators) so that agreement between the two is meaningful.
"""

from __future__ import annotations

import random
from fractions import Fraction

from lambdagrid.environment import NodeClass, NodeSpec, transfer_time
from lambdagrid.simkernel import ZERO, as_time
from lambdagrid.views import EnvSnapshot, LogRecord, RecordKind, ViewStore
from lambdagrid.workload import JobSpec

ONE = Fraction(1)


def mknode(
    nid,
    klass="cloud",
    cpu=1e9,
    mem=4e9,
    io=1e9,
    net=1e9,
    latency=0,
    mean_up=0,
    mean_down=0,
    cost_rate=0,
):
    return NodeSpec(
        id=nid,
        node_class=NodeClass(klass),
        cpu_speed=Fraction(str(cpu)),
        memory=Fraction(str(mem)),
        io_rate=Fraction(str(io)),
        link_bw=Fraction(str(net)),
        link_latency=as_time(latency),
        mean_up=as_time(mean_up),
        mean_down=as_time(mean_down),
        cost_rate=Fraction(str(cost_rate)),
    )


def make_snapshot(nodes, as_of=0, stats=None, availability=None, queue_work=None, queue_lengths=None):
    """Build an EnvSnapshot by hand for dispatcher unit tests.

    Unlisted nodes count as available with empty queues, matching what a
    fresh ViewStore would report.
    """
    node_map = {n.id: n for n in nodes}
    store = ViewStore(nodes=node_map)
    base = store.snapshot(as_of)
    return EnvSnapshot(
        as_of=base.as_of,
        nodes=node_map,
        stats=stats if stats is not None else base.stats,
        class_mean_duration={},
        availability=availability if availability is not None else base.availability,
        queue_work=queue_work or {},
        queue_lengths=queue_lengths or {},
    )


# ----------------------------------------------------------- stats oracle

def oracle_stats(records, as_of):
    """Full recomputation of per-node statistics over a whole record list.

    Collects raw material first (duration lists, transition lists) and only
    then derives the aggregate fields, so it shares no code path with the
    incremental batch/stream accumulators it is checked against.
    """
    as_of = as_time(as_of)
    durations: dict[str, list[Fraction]] = {}
    failed: dict[str, int] = {}
    beats: dict[str, int] = {}
    transitions: dict[str, list[tuple[Fraction, bool]]] = {}
    class_durs: dict[str, list[Fraction]] = {}

    for rec in records:
        if rec.kind is RecordKind.TASK_FINISH:
            node = rec.payload["node"]
            d = as_time(rec.payload["duration"])
            durations.setdefault(node, []).append(d)
            origin = str(rec.payload.get("origin", "Batch"))
            class_durs.setdefault(origin, []).append(d)
        elif rec.kind is RecordKind.TASK_FAIL:
            node = rec.payload["node"]
            failed[node] = failed.get(node, 0) + 1
        elif rec.kind is RecordKind.HEARTBEAT:
            beats[rec.subject] = beats.get(rec.subject, 0) + 1
        elif rec.kind is RecordKind.NODE_UP:
            transitions.setdefault(rec.subject, []).append((rec.at, True))
        elif rec.kind is RecordKind.NODE_DOWN:
            transitions.setdefault(rec.subject, []).append((rec.at, False))

    node_ids = set(durations) | set(failed) | set(beats) | set(transitions)
    per_node = {}
    for nid in node_ids:
        durs = durations.get(nid, [])
        completed = len(durs)
        nfail = failed.get(nid, 0)
        attempts = completed + nfail
        trans = transitions.get(nid, [])
        if not trans:
            availability = ONE
            currently_up = True
        else:
            up_time = ZERO
            state, since = None, None
            for at, up in trans:
                if state is True:
                    up_time += at - since
                state, since = up, at
            if state and as_of > since:
                up_time += as_of - since
            availability = up_time / as_of if as_of > 0 else ONE
            currently_up = state
        per_node[nid] = {
            "completed": completed,
            "failed": nfail,
            "heartbeats": beats.get(nid, 0),
            "duration_sum": sum(durs, ZERO),
            "duration_sq": sum((d * d for d in durs), ZERO),
            "max_duration": max(durs) if durs else None,
            "mean_duration": sum(durs, ZERO) / completed if completed else None,
            "success_rate": Fraction(completed, attempts) if attempts else ONE,
            "availability_fraction": availability,
            "currently_up": currently_up,
        }

    class_mean = {
        origin: sum(durs, ZERO) / len(durs) for origin, durs in class_durs.items()
    }
    return per_node, class_mean


def snapshot_to_plain(snapshot: EnvSnapshot, node_ids=None):
    """Project a snapshot's stats to the oracle's dict shape for comparison."""
    ids = node_ids if node_ids is not None else snapshot.stats.keys()
    per_node = {}
    for nid in ids:
        s = snapshot.stats[nid]
        per_node[nid] = {
            "completed": s.completed,
            "failed": s.failed,
            "heartbeats": s.heartbeats,
            "duration_sum": s.duration_sum,
            "duration_sq": s.duration_sq,
            "max_duration": s.max_duration,
            "mean_duration": s.mean_duration,
            "success_rate": s.success_rate,
            "availability_fraction": s.availability_fraction,
            "currently_up": s.currently_up,
        }
    class_mean = {k: v for k, v in snapshot.class_mean_duration.items() if v is not None}
    return per_node, class_mean


# ------------------------------------------------------ random log factory

_DECISION_KINDS = (
    RecordKind.TASK_START,
    RecordKind.MIGRATE,
    RecordKind.REPLICATE,
    RecordKind.AGGREGATE,
)


def random_log(rng: random.Random, n_records: int, node_ids=("a", "b", "c")):
    """A legal, randomly generated record sequence.

    Node transitions alternate (a node never goes down twice in a row); the
    first transition of a node may be either direction.  Decision-type
    records carry junk payloads that the statistics layer must ignore.
    """
    records = []
    t = ZERO
    state: dict[str, bool | None] = {nid: None for nid in node_ids}
    for i in range(n_records):
        t += Fraction(rng.randint(0, 400), 100)
        pick = rng.random()
        nid = rng.choice(node_ids)
        if pick < 0.28:
            d = Fraction(rng.randint(1, 5000), rng.randint(1, 100))
            payload = {"node": nid, "duration": d}
            if rng.random() < 0.7:
                payload["origin"] = rng.choice(("Batch", "MicroBatch"))
            rec = LogRecord(at=t, subject=f"t{i}", kind=RecordKind.TASK_FINISH, payload=payload)
        elif pick < 0.42:
            rec = LogRecord(
                at=t, subject=f"t{i}", kind=RecordKind.TASK_FAIL,
                payload={"node": nid, "phase": rng.choice(("queued", "running"))},
            )
        elif pick < 0.62:
            rec = LogRecord(at=t, subject=nid, kind=RecordKind.HEARTBEAT, payload={})
        elif pick < 0.82:
            if state[nid] is True:
                kind = RecordKind.NODE_DOWN
            elif state[nid] is False:
                kind = RecordKind.NODE_UP
            else:
                kind = rng.choice((RecordKind.NODE_UP, RecordKind.NODE_DOWN))
            state[nid] = kind is RecordKind.NODE_UP
            rec = LogRecord(at=t, subject=nid, kind=kind, payload={})
        else:
            rec = LogRecord(
                at=t, subject=f"x{i}", kind=rng.choice(_DECISION_KINDS),
                payload={"node": nid, "junk": rng.randint(0, 9)},
            )
        records.append(rec)
    return records


def replay_with_rebuilds(records, rng: random.Random, nodes=None):
    """Feed records into a ViewStore, randomly starting and committing batch
    rebuilds along the way, and return the store."""
    store = ViewStore(nodes=nodes)
    pending_commit_in = None
    for rec in records:
        store.append(rec)
        if pending_commit_in is not None:
            pending_commit_in -= 1
            if pending_commit_in <= 0:
                store.commit_rebuild()
                pending_commit_in = None
        elif rng.random() < 0.08:
            store.rebuild_batch_view(rec.at)
            pending_commit_in = rng.randint(0, 6)
    if pending_commit_in is not None and rng.random() < 0.5:
        store.commit_rebuild()
    return store


# ------------------------------------------------- micro-batch reference

def reference_batches(policy, event_times, duration):
    """Straight-line reimplementation of the micro-batching rules.

    Returns a list of (flush_time, event_count).  Arrivals and window
    boundaries are walked in time order; an arrival at exactly a boundary is
    processed before the boundary fires, matching the engine's event order
    (stream events are scheduled before the timer is re-armed).
    """
    window = policy.window
    has_window = window is not None and policy.mode.value in ("time-based", "hybrid")
    has_count = policy.max_count is not None and policy.mode.value in ("count-based", "hybrid")
    flushes = []
    buffer = 0
    last_flush = ZERO
    i = 0
    times = [as_time(t) for t in event_times]
    duration = as_time(duration)
    while True:
        next_arrival = times[i] if i < len(times) else None
        next_boundary = last_flush + window if has_window else None
        if next_boundary is not None and next_boundary > duration:
            next_boundary = None
        if next_arrival is None and next_boundary is None:
            break
        if next_boundary is None or (next_arrival is not None and next_arrival <= next_boundary):
            buffer += 1
            i += 1
            if has_count and buffer >= policy.max_count:
                flushes.append((next_arrival, buffer))
                buffer = 0
                last_flush = next_arrival
        else:
            if buffer:
                flushes.append((next_boundary, buffer))
                buffer = 0
            last_flush = next_boundary
    if buffer:
        flushes.append((duration, buffer))
    return flushes


# --------------------------------------------------- aggregation oracle

def brute_force_aggregation(job: JobSpec, snapshot: EnvSnapshot, partials):
    """Try every available node explicitly; return (node_id, arrival, compute).

    Ties follow the same published rule (cost, then rating, then id), with
    the rating read straight off the production scorer; the cost terms are
    recomputed here from first principles.
    """
    from lambdagrid.dispatcher import rate_node

    total = sum((size for _, size in partials), ZERO)
    best = None
    for nid in sorted(snapshot.nodes):
        if not snapshot.availability.get(nid, True):
            continue
        node = snapshot.nodes[nid]
        arrival = ZERO
        for holder, size in partials:
            t = transfer_time(size, snapshot.nodes.get(holder), node)
            if t > arrival:
                arrival = t
        compute = total / node.io_rate + job.aggregation_output_size / node.io_rate
        score = rate_node(snapshot, node).score
        key = (arrival + compute, -score, nid)
        if best is None or key < best[0]:
            best = (key, nid, arrival, compute)
    return best[1], best[2], best[3]
