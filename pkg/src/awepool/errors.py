"""Exception types raised by the toolkit.

Everything user-facing derives from :class:`AwepoolError` so callers (and the
CLI) can distinguish data/format problems from programming errors.
"""


class AwepoolError(Exception):
    """Base class for all toolkit errors."""


class ArchiveFormatError(AwepoolError):
    """A feature/embedding archive violates the container format."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConsistencyError(AwepoolError):
    """Entries in one archive disagree on dimensionality."""


class DataError(AwepoolError):
    """Values are unusable (non-finite, empty matrices, ...)."""


class AlignmentParseError(AwepoolError):
    """A TSV alignment row cannot be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(AwepoolError):
    """A parsed value violates a domain invariant (e.g. zero duration)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownUtteranceError(AwepoolError):
    """A word segment references an utterance missing from the archive."""


class ShapeMismatchError(AwepoolError):
    """Matrix/vector widths disagree with a fitted transform or peer."""


class UndefinedMetricError(AwepoolError):
    """AP/AUC requested on a pair set lacking a positive or negative class."""
