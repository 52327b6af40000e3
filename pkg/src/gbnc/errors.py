"""Exception hierarchy shared across the package."""

from __future__ import annotations


class GbncError(Exception):
    """Base class for all package errors."""


class DatasetError(GbncError, ValueError):
    pass


class MissingHeaderTag(DatasetError):
    pass


class DuplicateColumn(DatasetError):
    pass


class BadCell(DatasetError):
    def __init__(self, row: int, column: str, value: str, reason: str = "unparseable value"):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"{reason} {value!r} at data row {row}, column {column!r}")


class EmptyDataset(DatasetError):
    pass


class UnknownVariable(DatasetError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownState(DatasetError):
    pass


class SchemaMismatch(DatasetError):
    pass


class TooFewRows(DatasetError):
    pass


class DimensionMismatch(GbncError, ValueError):
    pass


class NumericalFailure(GbncError, ArithmeticError):
    pass


class CycleDetected(GbncError):
    pass


class TooManyClassVariables(GbncError, ValueError):
    pass


class LengthMismatch(GbncError, ValueError):
    pass


class TooFewMethods(GbncError, ValueError):
    pass


class InvalidSpec(GbncError, ValueError):
    pass


class VersionMismatch(GbncError):
    pass


class CorruptFile(GbncError):
    pass
