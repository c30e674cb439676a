"""Hybrid execution environment: stable cloud nodes plus volatile grid nodes.

Nodes are described by a capacity vector (cpu, memory, io, link) and, for
grid nodes, mean up/down durations driving an alternating churn process.
Cloud nodes never churn.  Topology is a star: every transfer crosses both
endpoints' access links, so transfer time is symmetric in (src, dst).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .errors import AlreadyDown, AlreadyUp, InvalidSpec, NotVolatile
from .simkernel import SimTime, ZERO, RngStream, as_time


class NodeClass(Enum):
    CLOUD = "cloud"
    GRID = "grid"


class NodeState(Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class NodeSpec:
    """Static description of one node.

    Units: cpu_speed flop/s, memory bytes, io_rate bytes/s, link_bw bytes/s,
    link_latency seconds, mean_up/mean_down seconds, cost_rate currency per
    second of busy time (recorded in reports, never used for decisions).
    """

    id: str
    node_class: NodeClass
    cpu_speed: Fraction
    memory: Fraction
    io_rate: Fraction
    link_bw: Fraction
    link_latency: SimTime = ZERO
    mean_up: SimTime = ZERO
    mean_down: SimTime = ZERO
    cost_rate: Fraction = ZERO


@dataclass(frozen=True)
class ChurnTransition:
    node_id: str
    at: SimTime
    state: NodeState


class ChurnModel(Enum):
    EXPONENTIAL = "exponential"
    DETERMINISTIC = "deterministic"


_CAPACITY_FIELDS = ("cpu_speed", "memory", "io_rate", "link_bw")


def _positive(raw: dict, field: str, path: str) -> Fraction:
    if field not in raw:
        raise InvalidSpec(f"{path}.{field}", "missing required field")
    try:
        value = Fraction(str(raw[field]))
    except (ValueError, ZeroDivisionError, TypeError):
        raise InvalidSpec(f"{path}.{field}", f"not a number: {raw[field]!r}") from None
    if value <= 0:
        raise InvalidSpec(f"{path}.{field}", "must be > 0")
    return value


def _nonnegative(raw: dict, field: str, path: str, default=ZERO) -> Fraction:
    if field not in raw:
        return default
    try:
        value = Fraction(str(raw[field]))
    except (ValueError, ZeroDivisionError, TypeError):
        raise InvalidSpec(f"{path}.{field}", f"not a number: {raw[field]!r}") from None
    if value < 0:
        raise InvalidSpec(f"{path}.{field}", "must be >= 0")
    return value


def parse_node_spec(raw: dict, path: str) -> NodeSpec:
    node_id = raw.get("id")
    if not node_id or not isinstance(node_id, str):
        raise InvalidSpec(f"{path}.id", "missing or empty node id")
    klass_raw = raw.get("class", raw.get("node_class"))
    try:
        klass = NodeClass(klass_raw)
    except ValueError:
        raise InvalidSpec(f"{path}.class", f"unknown node class {klass_raw!r}") from None

    caps = {f: _positive(raw, f, path) for f in _CAPACITY_FIELDS}
    latency = _nonnegative(raw, "link_latency", path)
    cost_rate = _nonnegative(raw, "cost_rate", path)
    mean_up = _nonnegative(raw, "mean_up", path)
    mean_down = _nonnegative(raw, "mean_down", path)

    if klass is NodeClass.CLOUD:
        if mean_down != 0:
            raise InvalidSpec(f"{path}.mean_down", "cloud nodes never churn; mean_down must be 0")
    else:
        if mean_up <= 0:
            raise InvalidSpec(f"{path}.mean_up", "grid nodes need mean_up > 0")

    return NodeSpec(
        id=node_id,
        node_class=klass,
        link_latency=latency,
        mean_up=mean_up,
        mean_down=mean_down,
        cost_rate=cost_rate,
        **caps,
    )


class Environment:
    """Runtime node registry: availability, transition log, running sets.

    The dispatcher and log live off-node, so a node that churns away loses
    its queue and any running work, but the monitoring log survives intact.
    """

    def __init__(self, nodes: list[NodeSpec], churn_model: ChurnModel = ChurnModel.EXPONENTIAL):
        self.nodes: dict[str, NodeSpec] = {}
        for spec in nodes:
            if spec.id in self.nodes:
                raise InvalidSpec(f"nodes.{spec.id}", "duplicate node id")
            self.nodes[spec.id] = spec
        self.churn_model = churn_model
        self.availability: dict[str, bool] = {nid: True for nid in self.nodes}
        self.transitions: list[ChurnTransition] = []
        self._running: dict[str, set[str]] = {nid: set() for nid in self.nodes}

    def node(self, node_id: str) -> NodeSpec:
        return self.nodes[node_id]

    def available_nodes(self) -> list[str]:
        return [nid for nid in sorted(self.nodes) if self.availability[nid]]

    def churning_nodes(self) -> list[str]:
        """Grid nodes that actually alternate.  mean_down == 0 means the node
        would rejoin instantly, which degenerates to no churn at all, so such
        nodes are left permanently up."""
        return [
            nid
            for nid in sorted(self.nodes)
            if self.nodes[nid].node_class is NodeClass.GRID and self.nodes[nid].mean_down > 0
        ]

    # -- running-task registry (maintained by the execution engine) --------

    def mark_running(self, node_id: str, task_id: str) -> None:
        self._running[node_id].add(task_id)

    def clear_running(self, node_id: str, task_id: str) -> None:
        self._running[node_id].discard(task_id)

    def running_on(self, node_id: str) -> set[str]:
        return set(self._running[node_id])

    # -- churn -------------------------------------------------------------

    def next_churn_transition(self, node_id: str, rng: RngStream, from_time) -> ChurnTransition:
        """Draw the next transition for a node, given its current state.

        An Up node transitions Down after an up-duration and vice versa.
        Durations are Exponential(1/mean) or, in deterministic mode, exactly
        the configured means.
        """
        spec = self.nodes[node_id]
        if spec.node_class is NodeClass.CLOUD:
            raise NotVolatile(f"{node_id} is a cloud node and never churns")
        from_time = as_time(from_time)
        if self.availability[node_id]:
            mean, to_state = spec.mean_up, NodeState.DOWN
        else:
            mean, to_state = spec.mean_down, NodeState.UP
        if self.churn_model is ChurnModel.DETERMINISTIC:
            duration = mean
        else:
            duration = Fraction(rng.expovariate(1.0 / float(mean))) if mean > 0 else ZERO
        return ChurnTransition(node_id=node_id, at=from_time + duration, state=to_state)

    def on_node_down(self, node_id: str, at) -> set[str]:
        """Mark a node down; returns the ids of tasks that were running there."""
        if not self.availability[node_id]:
            raise AlreadyDown(f"{node_id} is already down")
        at = as_time(at)
        self.availability[node_id] = False
        self.transitions.append(ChurnTransition(node_id, at, NodeState.DOWN))
        affected = set(self._running[node_id])
        self._running[node_id].clear()
        return affected

    def on_node_up(self, node_id: str, at) -> None:
        """Mark a node up again; it rejoins with an empty queue."""
        if self.availability[node_id]:
            raise AlreadyUp(f"{node_id} is already up")
        self.availability[node_id] = True
        self.transitions.append(ChurnTransition(node_id, as_time(at), NodeState.UP))


def build_environment(spec: dict) -> Environment:
    """Validate an environment description and return the initial state.

    All nodes start Up at t=0.  Raises InvalidSpec with the path of the
    first offending field.
    """
    if not isinstance(spec, dict):
        raise InvalidSpec("environment", "description must be a mapping")
    raw_nodes = spec.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise InvalidSpec("nodes", "at least one node is required")
    model_raw = spec.get("churn_model", "exponential")
    try:
        model = ChurnModel(model_raw)
    except ValueError:
        raise InvalidSpec("churn_model", f"unknown churn model {model_raw!r}") from None
    parsed = [parse_node_spec(raw, f"nodes[{i}]") for i, raw in enumerate(raw_nodes)]
    return Environment(parsed, churn_model=model)


def transfer_time(nbytes, src: NodeSpec | None, dst: NodeSpec | None) -> SimTime:
    """Time to move ``nbytes`` between two endpoints of the star topology.

    ``None`` stands for the dispatcher ingress, which contributes neither
    latency nor a bandwidth cap.  Local means free: src is dst gives 0.
    """
    if src is not None and dst is not None and src.id == dst.id:
        return ZERO
    if src is None and dst is None:
        return ZERO
    nbytes = Fraction(str(nbytes)) if not isinstance(nbytes, Fraction) else nbytes
    latency = ZERO
    bandwidths = []
    for end in (src, dst):
        if end is not None:
            latency += end.link_latency
            bandwidths.append(end.link_bw)
    return latency + nbytes / min(bandwidths)
