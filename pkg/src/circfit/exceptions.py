"""Exception hierarchy shared across the package.

Grouping matters for the command line tool, which maps usage problems,
data-format problems and numeric failures to distinct exit codes.
"""


class CircfitError(Exception):
    """Base class for everything raised deliberately by this package."""


class DomainError(CircfitError, ValueError):
    """An argument is outside the domain a routine is defined on."""


class UndefinedMeanError(CircfitError, ArithmeticError):
    """Circular mean requested for a sample with a vanishing resultant."""


class DegenerateNeighborhoodError(CircfitError, ArithmeticError):
    """Local-fit denominator is numerically zero around the target point."""


class NumericError(CircfitError, ArithmeticError):
    """A numeric routine could not reach its accuracy or stability target."""


class SelectionError(CircfitError):
    """Bandwidth selection failed (e.g. a fold with no defined predictions)."""


class DataError(CircfitError, ValueError):
    """Input data could not be ingested (missing columns, bad cells, ...)."""
