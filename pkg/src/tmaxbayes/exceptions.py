"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
input problems (``InputError``, exit 1) and numerical/runtime failures
(``NumericalError``, exit 2).
"""


class TmaxError(Exception):
    """Base class for all package errors."""


class InputError(TmaxError):
    """Bad or inconsistent user input."""


class NumericalError(TmaxError):
    """A computation could not be carried out."""


class IngestError(InputError):
    """Missing, duplicate or non-consecutive years in an input table."""


class ParseError(InputError):
    """A cell could not be parsed as a number."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(InputError):
    """A table or series violates a domain invariant."""

    def __init__(self, message, years=None):
        super().__init__(message)
        self.years = list(years) if years is not None else []


class ShapeError(InputError):
    """Array arguments have incompatible shapes."""


class DegenerateError(NumericalError):
    """A statistic is undefined for the input (e.g. zero variance)."""


class InitError(NumericalError):
    """Log density is not finite at the initial point."""


class StuckChainError(NumericalError):
    """A block rejected every proposal during burn-in."""

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class QuadratureError(NumericalError):
    """Numerical integration could not be set up or did not produce a finite value."""


class InsufficientDrawsError(NumericalError):
    """Too few posterior draws for the requested estimator."""
