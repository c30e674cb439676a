"""Error types raised by the report tool."""


class ReportError(Exception):
    """Base class for everything this tool raises on purpose."""


class ParseError(ReportError):
    """An input file does not match the exported report schema."""


class IncompleteLadder(ReportError):
    """A chart needs all six parts A-F, each with a makespan."""
