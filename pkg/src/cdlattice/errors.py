"""Exception types shared across the package.

The CLI maps ``PreconditionError`` (and subclasses) to exit code 2 and
``NumericError`` to exit code 3.
"""

from __future__ import annotations


class PreconditionError(ValueError):
    """An input violates a stated precondition."""


class DomainError(PreconditionError):
    """A parameter lies outside the admissible domain of a formula."""


class AdmissibilityError(PreconditionError):
    """A lattice function is not summable against the kernel, or no tail bound applies."""


class NumericError(ArithmeticError):
    """A numerical procedure failed (division by an enclosure of zero, non-convergence, ...)."""
