"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class SchedulingInPast(SimulationError):
    """An event was scheduled before the current virtual time."""


class InvalidSpec(SimulationError):
    """An environment or workload description failed validation.

    ``path`` names the offending field, e.g. ``nodes[2].mean_up``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class NotVolatile(SimulationError):
    """Churn was requested for a node class that never churns."""


class AlreadyDown(SimulationError):
    """A down transition was applied to a node that is already down."""


class AlreadyUp(SimulationError):
    """An up transition was applied to a node that is already up."""


class EmptyBatch(SimulationError):
    """A micro-batch operation received no events."""


class OutOfOrder(SimulationError):
    """A log record was appended with a timestamp before the log head."""


class NoAvailableNode(SimulationError):
    """No node is available to host a task."""


class JobIncomplete(SimulationError):
    """Aggregation was planned for a job that still has unfinished tasks."""


class InvalidConfig(SimulationError):
    """A scenario configuration failed validation."""


class EnvironmentFileError(SimulationError):
    """The environment description file could not be read or parsed."""


class WorkloadFileError(SimulationError):
    """The workload description file could not be read or parsed."""


class IoError(SimulationError):
    """A report export could not be written."""
