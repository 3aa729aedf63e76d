"""Exception hierarchy shared by all fenec modules.

Every error raised on a user-facing contract boundary derives from
:class:`FenecError` so the CLI can map failures onto stable exit codes.
"""


class FenecError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FenecError):
    """Invalid configuration: bad value, unknown key, missing required field."""


class FormatError(FenecError):
    """A binary file does not start with the expected magic/version."""


class CorruptionError(FenecError):
    """A binary file is structurally valid but truncated or inconsistent."""


class DataError(FenecError):
    """Payload values violate a data contract (non-finite, negative, empty)."""


class SplitError(FenecError):
    """Task split lists overlap or are otherwise malformed."""


class CoverageError(FenecError):
    """A label present in the data is not covered by the task split."""


class InsufficientDataError(FenecError):
    """A class has too few samples for covariance estimation."""


class DuplicateClassError(FenecError):
    """A task re-introduces a class that the model already stores."""


class ShapeError(FenecError):
    """Matrix/vector dimensions do not match."""


class NormalizationError(FenecError):
    """Normalization impossible: zero row or non-positive diagonal."""


class ConditioningError(FenecError):
    """Cholesky factorization failed; the covariance needs more shrinkage."""


class CardinalityError(FenecError):
    """Requested more clusters than there are samples."""


class DegenerateLossError(FenecError):
    """Cross-entropy training requires at least two classes."""


class AggregationError(FenecError):
    """Run reports with mismatched task counts cannot be aggregated."""
