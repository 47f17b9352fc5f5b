"""Exception hierarchy shared by every stage of the toolkit."""

from __future__ import annotations


class BlindspotError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(BlindspotError, ValueError):
    """Input violates a documented precondition."""


class ParseError(InvalidInputError):
    """A CSV row could not be parsed.

    Parameters
    ----------
    row : int
        1-based line number in the source file (the header is line 1).
    message : str
        What went wrong on that line.
    """

    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class EmptyInputError(InvalidInputError):
    """The source contained a header but no data rows (or nothing at all)."""


class SchemaError(InvalidInputError):
    """CSV header or array shape does not match the expected schema."""


class SplitError(InvalidInputError):
    """A chronological split would leave one side empty."""


class LeakageError(InvalidInputError):
    """Anomalous data reached a stage that must only see benign data."""


class TrainingDivergedError(BlindspotError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str = "non-finite training loss"):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")


class StageError(BlindspotError):
    """Wraps an error raised inside one stage of :func:`run_experiment`."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
