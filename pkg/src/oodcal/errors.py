"""Exception types raised across the toolkit.

Data-file errors carry the 1-based data row index (header excluded) of the
first offending row.
"""

from __future__ import annotations


class OodcalError(Exception):
    """Base class for all toolkit errors."""


class UsageError(OodcalError):
    """Bad configuration or flag value (CLI exit code 2)."""


# --- dataset ---------------------------------------------------------------

class MalformedHeader(OodcalError):
    pass


class RowError(OodcalError):
    """Base for errors that name the first offending data row."""

    def __init__(self, row: int, message: str = ""):
        self.row = row
        super().__init__(message or f"{type(self).__name__} at row {row}")


class NonFiniteValue(RowError):
    pass


class LabelOutOfRange(RowError):
    pass


class DuplicateId(RowError):
    pass


class ColumnCountMismatch(RowError):
    pass


class ClassTooSmall(OodcalError):
    def __init__(self, class_index: int | None, message: str = ""):
        self.class_index = class_index
        super().__init__(message or f"class {class_index} has too few samples")


class UnlabeledDataset(OodcalError):
    pass


# --- scores ----------------------------------------------------------------

class EmptyVector(OodcalError):
    pass


class NonPositiveTemperature(OodcalError):
    pass


class SingularCovariance(OodcalError):
    pass


class DimensionMismatch(OodcalError):
    pass


class KExceedsReferenceSize(OodcalError):
    pass


class ColumnKindMismatch(OodcalError):
    """Detector requires logits but the dataset holds features (or similar)."""


# --- calibrate -------------------------------------------------------------

class EmptyScores(OodcalError):
    pass


class BetaOutOfRange(OodcalError):
    pass


class MissingActivated(OodcalError):
    pass


class ClassIndexOutOfRange(OodcalError):
    pass


# --- simulate --------------------------------------------------------------

class AllThresholdsInfinite(OodcalError):
    pass


# --- analyze ---------------------------------------------------------------

class EmptyInput(OodcalError):
    pass


class ConstantInput(OodcalError):
    pass


class LengthMismatch(OodcalError):
    pass


class SetNameMismatch(OodcalError):
    pass
