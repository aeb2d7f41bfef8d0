"""Exception hierarchy for the pipeline.

The CLI maps exception classes to exit codes: configuration problems exit
with 2, data problems with 3, numeric failures (non-finite loss) with 4.
"""


class CovertDecodeError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(CovertDecodeError):
    """Invalid configuration: unknown keys, bad values, impossible requests."""

    exit_code = 2


class FilterDesignError(ConfigError):
    """The requested filter cannot be realized (bad cutoffs, unstable design)."""


class DataError(CovertDecodeError):
    """Input data violates a precondition or is malformed."""

    exit_code = 3


class FileFormatError(DataError):
    """A data file has the wrong magic, version, or layout."""


class EpochingError(DataError):
    """Signal too short for the requested filtering or epoching."""


class DegenerateInputError(DataError):
    """Rank-deficient input (e.g. duplicated channels) where full rank is required."""


class NumericError(CovertDecodeError):
    """Non-finite values appeared where finite arithmetic is required."""

    exit_code = 4
