"""Exception hierarchy shared across the package.

``ConfigError`` maps to CLI exit code 2, ``DataError`` subclasses to 3,
``IncompatibleArtifacts`` to 4.
"""

from __future__ import annotations


class NewsSignalError(Exception):
    """Base class for all package errors."""


class ConfigError(NewsSignalError):
    """Invalid configuration value, flag, or config/calendar file."""


class IncompatibleArtifacts(NewsSignalError):
    """Artifacts produced by mismatched schema or format versions."""


class DataError(NewsSignalError):
    """Base class for problems with the input data itself."""


class IngestError(DataError):
    """Unreadable or structurally invalid input stream."""


class NoPriceCoverage(DataError):
    """Price series does not cover a required instant for an instrument."""

    def __init__(self, instrument: str, instant=None, detail: str = ""):
        self.instrument = instrument
        self.instant = instant
        msg = f"no usable price for {instrument}"
        if instant is not None:
            msg += f" at {instant}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class EmptyDataset(DataError):
    """An operation that needs at least one example received none."""


class EmptyHeadline(DataError):
    """A headline produced no tokens to embed."""


class BadMagic(DataError):
    """Binary artifact does not start with the expected magic bytes."""


class Truncated(DataError):
    """Binary artifact ended before the payload promised by its header."""


class DegenerateTraining(DataError):
    """Training input does not contain both classes (or is otherwise unusable)."""


class NoSentimentWords(DataError):
    """Screening removed the entire vocabulary."""


class ShapeError(NewsSignalError):
    """Array shape inconsistent with the model or format contract."""


class InvalidProbability(NewsSignalError):
    """Probability outside [0, 1]."""


class AlignmentError(DataError):
    """Two id-keyed artifacts do not refer to the same news items."""


class DegenerateSharpe(NewsSignalError):
    """Sharpe ratio undefined: fewer than two active days or zero variance."""
