"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class PragmaError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(PragmaError, ValueError):
    """Invalid configuration: bad field values, unknown names, degenerate bounds."""


class DomainError(PragmaError, ValueError):
    """A parameter or outcome lies outside the space of the family."""


class NumericError(PragmaError, ArithmeticError):
    """A numerical routine failed to reach the requested accuracy."""

    def __init__(self, message: str, achieved_tol: float | None = None, point=None):
        super().__init__(message)
        self.achieved_tol = achieved_tol
        self.point = point


class GridMismatchError(PragmaError, ValueError):
    """Set operations were attempted on regions defined over different grids."""


class DegeneratePosteriorError(PragmaError, ArithmeticError):
    """The likelihood (times prior) vanishes on every grid point."""


class UnsupportedKindError(PragmaError, ValueError):
    """The requested dissimilarity kind is outside the scope of an operation."""
