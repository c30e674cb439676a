"""Lambda-style monitoring: master log, batch views, stream views, snapshots.

Every observable fact about the run lands in one append-only master log.
The batch layer periodically recomputes a full view of that log in the
background; the rebuilt view only becomes visible ``rebuild_delay`` later.
The speed layer keeps an incremental view of the records appended since the
last visible batch view.  A snapshot is the merge of both.

Only mergeable aggregates are kept (counts, sums, sum of squares, max, and
closed up-time intervals), and all arithmetic is exact rational, so merging
the batch part with the stream delta is equal, field by field, to a full
recomputation over the whole log.  That equality is the correctness anchor
for the decision engine's inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .environment import NodeSpec
from .errors import OutOfOrder
from .simkernel import SimTime, ZERO, as_time

ONE = Fraction(1)


class RecordKind(Enum):
    HEARTBEAT = "Heartbeat"
    NODE_UP = "NodeUp"
    NODE_DOWN = "NodeDown"
    TASK_START = "TaskStart"
    TASK_FINISH = "TaskFinish"
    TASK_FAIL = "TaskFail"
    MIGRATE = "Migrate"
    REPLICATE = "Replicate"
    AGGREGATE = "Aggregate"


@dataclass
class LogRecord:
    """One master-log entry.  ``seq`` is assigned on append."""

    at: SimTime
    subject: str
    kind: RecordKind
    payload: dict
    seq: int = -1


def _json_value(value):
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, Enum):
        return value.value
    return value


def record_to_json_line(record: LogRecord) -> str:
    """Stable one-line JSON form used for trace export and replay diffs."""
    doc = {
        "at": _json_value(record.at),
        "seq": record.seq,
        "subject": record.subject,
        "kind": record.kind.value,
        "payload": {k: _json_value(v) for k, v in record.payload.items()},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class MasterLog:
    """Append-only record store ordered by (at, seq)."""

    def __init__(self) -> None:
        self.records: list[LogRecord] = []

    def append(self, record: LogRecord) -> LogRecord:
        if self.records and record.at < self.records[-1].at:
            raise OutOfOrder(
                f"record at {record.at} appended after log head {self.records[-1].at}"
            )
        record.seq = len(self.records)
        self.records.append(record)
        return record

    def __len__(self) -> int:
        return len(self.records)

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.records:
                fh.write(record_to_json_line(record) + "\n")


@dataclass
class _NodeAccum:
    """Mergeable per-node aggregates over a span of the log."""

    completed: int = 0
    failed: int = 0
    heartbeats: int = 0
    dur_sum: Fraction = ZERO
    dur_sq: Fraction = ZERO
    dur_max: Fraction | None = None
    up_closed: Fraction = ZERO  # closed up-intervals inside this span
    state: bool | None = None  # availability after the last transition seen
    state_since: SimTime | None = None


@dataclass
class _ClassAccum:
    count: int = 0
    dur_sum: Fraction = ZERO


class _StatsAccum:
    """Folds log records into per-node and per-task-class aggregates."""

    def __init__(self, carry_states: dict[str, tuple[bool, SimTime]] | None = None):
        self.nodes: dict[str, _NodeAccum] = {}
        self.classes: dict[str, _ClassAccum] = {}
        if carry_states:
            for nid, (state, since) in carry_states.items():
                acc = self._node(nid)
                acc.state = state
                acc.state_since = since

    def _node(self, node_id: str) -> _NodeAccum:
        acc = self.nodes.get(node_id)
        if acc is None:
            acc = self.nodes[node_id] = _NodeAccum()
        return acc

    def add(self, record: LogRecord) -> None:
        kind = record.kind
        if kind is RecordKind.TASK_FINISH:
            node = record.payload["node"]
            duration = as_time(record.payload["duration"])
            acc = self._node(node)
            acc.completed += 1
            acc.dur_sum += duration
            acc.dur_sq += duration * duration
            if acc.dur_max is None or duration > acc.dur_max:
                acc.dur_max = duration
            origin = str(record.payload.get("origin", "Batch"))
            cls = self.classes.setdefault(origin, _ClassAccum())
            cls.count += 1
            cls.dur_sum += duration
        elif kind is RecordKind.TASK_FAIL:
            self._node(record.payload["node"]).failed += 1
        elif kind is RecordKind.HEARTBEAT:
            self._node(record.subject).heartbeats += 1
        elif kind is RecordKind.NODE_UP:
            acc = self._node(record.subject)
            if acc.state is False and acc.state_since is not None:
                pass  # down interval closes; down time is implicit
            acc.state = True
            acc.state_since = record.at
        elif kind is RecordKind.NODE_DOWN:
            acc = self._node(record.subject)
            if acc.state is True and acc.state_since is not None:
                acc.up_closed += record.at - acc.state_since
            acc.state = False
            acc.state_since = record.at
        # Migrate/Replicate/Aggregate/TaskStart records carry decisions;
        # they are retained in the log but add nothing to these aggregates.

    def carry_states(self) -> dict[str, tuple[bool, SimTime]]:
        return {
            nid: (acc.state, acc.state_since)
            for nid, acc in self.nodes.items()
            if acc.state is not None and acc.state_since is not None
        }


def _materialize_node(acc: _NodeAccum | None, as_of: SimTime) -> "NodeStats":
    if acc is None:
        acc = _NodeAccum()
    attempts = acc.completed + acc.failed
    success = Fraction(acc.completed, attempts) if attempts else ONE
    mean = acc.dur_sum / acc.completed if acc.completed else None
    if acc.state is None:
        availability = ONE
        currently_up = True
    else:
        up = acc.up_closed
        if acc.state and acc.state_since is not None and as_of > acc.state_since:
            up += as_of - acc.state_since
        availability = up / as_of if as_of > 0 else ONE
        currently_up = bool(acc.state)
    return NodeStats(
        completed=acc.completed,
        failed=acc.failed,
        heartbeats=acc.heartbeats,
        duration_sum=acc.dur_sum,
        duration_sq=acc.dur_sq,
        max_duration=acc.dur_max,
        mean_duration=mean,
        success_rate=success,
        availability_fraction=availability,
        currently_up=currently_up,
    )


def _merge_accums(b: _NodeAccum | None, s: _NodeAccum | None) -> _NodeAccum:
    merged = _NodeAccum()
    for part in (b, s):
        if part is None:
            continue
        merged.completed += part.completed
        merged.failed += part.failed
        merged.heartbeats += part.heartbeats
        merged.dur_sum += part.dur_sum
        merged.dur_sq += part.dur_sq
        if part.dur_max is not None and (merged.dur_max is None or part.dur_max > merged.dur_max):
            merged.dur_max = part.dur_max
        merged.up_closed += part.up_closed
        if part.state is not None:
            merged.state = part.state
            merged.state_since = part.state_since
    return merged


@dataclass(frozen=True)
class NodeStats:
    """Materialized per-node statistics inside a snapshot."""

    completed: int
    failed: int
    heartbeats: int
    duration_sum: Fraction
    duration_sq: Fraction
    max_duration: Fraction | None
    mean_duration: Fraction | None
    success_rate: Fraction
    availability_fraction: Fraction
    currently_up: bool


@dataclass(frozen=True)
class EnvSnapshot:
    """Merged environment knowledge as of one instant.

    ``queue_work`` (pending compute seconds per node) and ``queue_lengths``
    come from the live engine state, not the log; they default to empty when
    a snapshot is built from a bare log.
    """

    as_of: SimTime
    nodes: dict[str, NodeSpec]
    stats: dict[str, NodeStats]
    class_mean_duration: dict[str, Fraction | None]
    availability: dict[str, bool]
    queue_work: dict[str, Fraction]
    queue_lengths: dict[str, int]


@dataclass
class BatchView:
    """Full recomputation over a log prefix; visible only after the delay."""

    built_at: SimTime
    covers_until: SimTime
    prefix_len: int
    stats: _StatsAccum

    @property
    def per_node(self) -> dict[str, dict]:
        out = {}
        for nid in sorted(self.stats.nodes):
            m = _materialize_node(self.stats.nodes[nid], self.covers_until)
            out[nid] = {
                "mean_duration": m.mean_duration,
                "success_rate": m.success_rate,
                "availability": m.availability_fraction,
                "completed": m.completed,
            }
        return out

    @property
    def per_task_class(self) -> dict[str, Fraction | None]:
        return {
            origin: (acc.dur_sum / acc.count if acc.count else None)
            for origin, acc in sorted(self.stats.classes.items())
        }


class ViewStore:
    """Owns the master log plus the batch/stream view pair.

    ``rebuild_batch_view(now)`` starts a rebuild covering everything
    appended so far; the caller promotes it with ``commit_rebuild()`` once
    the rebuild delay has elapsed.  While a rebuild is in flight, appends
    feed both the current stream view and the epoch that will replace it,
    so no record is ever lost at the handover.
    """

    def __init__(self, nodes: dict[str, NodeSpec] | None = None):
        self.log = MasterLog()
        self._nodes = dict(nodes) if nodes else {}
        self._batch: BatchView | None = None
        self._stream = _StatsAccum()
        self._stream_since: SimTime = ZERO
        self._pending: tuple[BatchView, _StatsAccum] | None = None

    @property
    def batch_view(self) -> BatchView | None:
        return self._batch

    @property
    def stream_since(self) -> SimTime:
        return self._stream_since

    def append(self, record: LogRecord) -> LogRecord:
        record = self.log.append(record)
        self._stream.add(record)
        if self._pending is not None:
            self._pending[1].add(record)
        return record

    def rebuild_batch_view(self, now) -> BatchView:
        now = as_time(now)
        if self._pending is not None:
            raise ValueError("a batch view rebuild is already in flight")
        acc = _StatsAccum()
        for record in self.log.records:
            acc.add(record)
        view = BatchView(built_at=now, covers_until=now, prefix_len=len(self.log), stats=acc)
        self._pending = (view, _StatsAccum(carry_states=acc.carry_states()))
        return view

    def commit_rebuild(self) -> BatchView:
        """Make the in-flight rebuild visible and reset the stream view."""
        if self._pending is None:
            raise ValueError("no batch view rebuild in flight")
        view, epoch = self._pending
        self._batch = view
        self._stream = epoch
        self._stream_since = view.covers_until
        self._pending = None
        return view

    def snapshot(
        self,
        as_of,
        queue_work: dict[str, Fraction] | None = None,
        queue_lengths: dict[str, int] | None = None,
    ) -> EnvSnapshot:
        """Merge of the visible batch view and the stream delta at ``as_of``."""
        as_of = as_time(as_of)
        batch_nodes = self._batch.stats.nodes if self._batch else {}
        node_ids = set(self._nodes) | set(batch_nodes) | set(self._stream.nodes)
        stats: dict[str, NodeStats] = {}
        availability: dict[str, bool] = {}
        for nid in sorted(node_ids):
            merged = _merge_accums(batch_nodes.get(nid), self._stream.nodes.get(nid))
            stats[nid] = _materialize_node(merged, as_of)
            availability[nid] = stats[nid].currently_up

        batch_classes = self._batch.stats.classes if self._batch else {}
        class_ids = set(batch_classes) | set(self._stream.classes)
        class_mean: dict[str, Fraction | None] = {}
        for cid in sorted(class_ids):
            count = 0
            total = ZERO
            for part in (batch_classes.get(cid), self._stream.classes.get(cid)):
                if part is not None:
                    count += part.count
                    total += part.dur_sum
            class_mean[cid] = total / count if count else None

        return EnvSnapshot(
            as_of=as_of,
            nodes=dict(self._nodes),
            stats=stats,
            class_mean_duration=class_mean,
            availability=availability,
            queue_work=dict(queue_work or {}),
            queue_lengths=dict(queue_lengths or {}),
        )
