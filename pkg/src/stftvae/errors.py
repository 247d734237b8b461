"""Exception hierarchy.

Every error carries a short machine-readable ``category`` so the command
line can report it and pick an exit code.
"""


class StftVaeError(Exception):
    category = "error"
    exit_code = 1


class ShapeError(StftVaeError, ValueError):
    category = "shape"
    exit_code = 2


class DomainError(StftVaeError, ValueError):
    category = "domain"
    exit_code = 2


class GradientError(StftVaeError):
    category = "gradient"
    exit_code = 2


class ConfigError(StftVaeError, ValueError):
    category = "config"
    exit_code = 3


class DataFormatError(StftVaeError):
    """Malformed input file. ``offset`` is a byte offset or a 1-based line number."""

    category = "data"
    exit_code = 4

    def __init__(self, message, path=None, offset=None, line=None):
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"offset {offset}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.path = path
        self.offset = offset
        self.line = line


class DataIOError(StftVaeError, OSError):
    category = "io"
    exit_code = 4


class CheckpointError(StftVaeError):
    category = "checkpoint"
    exit_code = 5


class NonFiniteLossError(StftVaeError, FloatingPointError):
    category = "numeric"
    exit_code = 6


class MissingRunError(StftVaeError):
    category = "missing-run"
    exit_code = 7
