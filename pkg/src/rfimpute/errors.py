"""Exception types raised across the package."""


class RfImputeError(Exception):
    """Base class for all package-specific errors."""


class ParseError(RfImputeError):
    """A CSV file could not be parsed (ragged rows, bad cell for a forced kind)."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyDataError(RfImputeError):
    """A CSV file contained no columns."""


class InsufficientColumnsError(RfImputeError):
    """Fewer than two numeric columns were eligible for the correlation summary."""


class ConfigError(RfImputeError):
    """A forest or imputation configuration violates its invariants."""


class AllMissingError(RfImputeError):
    """A column has no observed values, so no fill value can be derived."""

    def __init__(self, column):
        super().__init__(f"column {column!r} is entirely missing")
        self.column = column


class MechanismError(RfImputeError):
    """A missingness mechanism cannot be applied to the given table."""


class NoCellsError(RfImputeError):
    """The requested missingness fraction selects no cells."""


class DegenerateBaselineError(RfImputeError):
    """The strawman baseline error is zero, so relative error is undefined."""
