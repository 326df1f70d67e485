"""Exception hierarchy shared by the library and the CLI.

Every error type carries the process exit code the CLI maps it to, so
subcommands never need per-exception translation tables.
"""


class ToolkitError(Exception):
    """Base class for all mdseg errors."""

    exit_code = 1


class StrictFailure(ToolkitError):
    """A verification warning promoted to an error under --strict."""

    exit_code = 1


class ParseError(ToolkitError):
    """Malformed or inconsistent input file (CSV, JSON, SGLT header)."""

    exit_code = 2


class DataError(ToolkitError):
    """Well-formed file whose content violates a contract (bad pixel, shape mismatch)."""

    exit_code = 3


class ScheduleError(DataError):
    """Schedule construction failed, e.g. a phase with an empty sample pool."""


class InversionError(DataError):
    """Mapping inversion failed under the strict collision policy."""


class PredictorError(ToolkitError):
    """External predictor failed, exited, or replied with garbage."""

    exit_code = 4
