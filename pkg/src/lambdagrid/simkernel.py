"""Deterministic discrete-event simulation core.

One :class:`SimKernel` owns one run: a virtual clock, an event queue ordered
by ``(fire_at, seq)``, and seeded random streams.  Simulated time is kept as
:class:`fractions.Fraction` throughout so replays, the analytic time
estimator, and the monitoring-view merge can be checked for exact equality
instead of within-epsilon.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Callable

from .errors import SchedulingInPast

# Simulated seconds.  Exact rational; never a float inside the simulator.
SimTime = Fraction

ZERO = Fraction(0)


def as_time(value: int | float | str | Fraction) -> SimTime:
    """Exact conversion of a config or user value to simulated seconds.

    Floats convert exactly (every float is a dyadic rational).  Strings are
    parsed as exact decimals, so ``"0.05"`` means 1/20 and not the nearest
    binary float.
    """
    if isinstance(value, bool):
        raise TypeError("boolean is not a time value")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, float, str)):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as simulated seconds")


class EventKind(Enum):
    """Closed set of event kinds the kernel will carry."""

    NODE_UP = "node-up"
    NODE_DOWN = "node-down"
    TASK_START = "task-start"
    TASK_FINISH = "task-finish"
    TASK_FAIL = "task-fail"
    BATCH_VIEW_REBUILD = "batch-view-rebuild"
    STREAM_EVENT = "stream-event"
    TIMER = "timer"


@dataclass
class Event:
    """A scheduled occurrence.  ``fire_at`` and ``seq`` are set by the kernel."""

    kind: EventKind
    payload: Any = None
    callback: Callable[["Event"], None] | None = None
    fire_at: SimTime | None = None
    seq: int | None = None


class RngStream:
    """Deterministic random stream; ``(seed, label)`` fully determines the draws.

    Labels separate concerns (churn, workload, ...) so that toggling one
    service on or off between scenario parts does not shift the draws any
    other concern sees.  Seeding goes through SHA-256 rather than ``hash()``
    so streams are stable across interpreter runs and platforms.
    """

    def __init__(self, seed: int, label: str):
        self.seed = seed
        self.label = label
        digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "big"))

    def random(self) -> float:
        """Uniform draw in [0, 1)."""
        return self._rng.random()

    def uniform(self, a: float, b: float) -> float:
        return self._rng.uniform(a, b)

    def expovariate(self, lambd: float) -> float:
        return self._rng.expovariate(lambd)

    def randint(self, a: int, b: int) -> int:
        return self._rng.randint(a, b)

    def choice(self, seq):
        return self._rng.choice(seq)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r})"


def rng_stream(seed: int, label: str) -> RngStream:
    """Create the labeled stream for ``(seed, label)``."""
    return RngStream(seed, label)


class SimKernel:
    """Virtual clock plus ordered event queue.

    Events fire in ``(fire_at, seq)`` order, so simultaneous events fire in
    the order they were scheduled.  Cancelled events are tombstoned in place
    and skipped on pop; that keeps the bookkeeping invariant

        scheduled == processed + cancelled + pending

    trivially true at every step.  Single-threaded by design: one kernel, one
    run.
    """

    def __init__(self) -> None:
        self._now: SimTime = ZERO
        self._heap: list[tuple[SimTime, int, Event]] = []
        self._next_seq = 0
        self._pending_ids: set[int] = set()
        self._tombstones: set[int] = set()
        self.scheduled = 0
        self.processed = 0
        self.cancelled = 0

    def now(self) -> SimTime:
        return self._now

    def pending(self) -> int:
        return self.scheduled - self.processed - self.cancelled

    def schedule(self, event: Event, at: int | float | str | Fraction) -> int:
        """Schedule ``event`` at absolute time ``at``; returns its event id."""
        at = as_time(at)
        if at < self._now:
            raise SchedulingInPast(f"cannot schedule at {at} (now is {self._now})")
        event.fire_at = at
        event.seq = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._heap, (at, event.seq, event))
        self._pending_ids.add(event.seq)
        self.scheduled += 1
        return event.seq

    def cancel(self, event_id: int) -> bool:
        """Tombstone a pending event.  Returns False if it already fired."""
        if event_id not in self._pending_ids:
            return False
        self._pending_ids.discard(event_id)
        self._tombstones.add(event_id)
        self.cancelled += 1
        return True

    def peek_time(self) -> SimTime | None:
        """Fire time of the earliest live event, or None if the queue is empty."""
        while self._heap and self._heap[0][1] in self._tombstones:
            _, seq, _ = heapq.heappop(self._heap)
            self._tombstones.discard(seq)
        return self._heap[0][0] if self._heap else None

    def run_until(self, t: int | float | str | Fraction) -> int:
        """Process every event with fire_at <= t; afterwards now() == t."""
        t = as_time(t)
        if t < self._now:
            raise ValueError(f"run_until({t}) would move the clock backwards (now {self._now})")
        processed = 0
        while True:
            head = self.peek_time()
            if head is None or head > t:
                break
            processed += self._step()
        self._now = t
        return processed

    def run(
        self,
        stop: Callable[[], bool] | None = None,
        horizon: int | float | str | Fraction | None = None,
    ) -> int:
        """Drain the queue, stopping early when ``stop()`` turns true.

        With a ``horizon``, events past it are left unprocessed and the clock
        is parked at the horizon.
        """
        limit = as_time(horizon) if horizon is not None else None
        processed = 0
        while True:
            head = self.peek_time()
            if head is None:
                break
            if limit is not None and head > limit:
                self._now = limit
                break
            processed += self._step()
            if stop is not None and stop():
                break
        return processed

    def _step(self) -> int:
        at, seq, event = heapq.heappop(self._heap)
        if seq in self._tombstones:
            self._tombstones.discard(seq)
            return 0
        self._pending_ids.discard(seq)
        self._now = at
        self.processed += 1
        if event.callback is not None:
            event.callback(event)
        return 1
