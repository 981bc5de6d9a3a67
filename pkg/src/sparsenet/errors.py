"""Exception hierarchy shared across the package.

The CLI maps these onto distinct process exit codes, so new error
conditions should reuse one of the classes below rather than raising
bare ValueError at the top level.
"""


class SparsenetError(Exception):
    """Base class for all package errors."""


class ShapeError(SparsenetError):
    """Operands have incompatible shapes (no implicit broadcasting)."""


class DataFormatError(SparsenetError):
    """A dataset file is malformed: bad magic, truncated, or inconsistent."""


class CheckpointError(SparsenetError):
    """A checkpoint file is malformed or does not match the target network."""


class ConfigError(SparsenetError):
    """A run configuration failed to parse or validate."""


class NumericError(SparsenetError):
    """Training produced a non-finite value; the run is unrecoverable."""
