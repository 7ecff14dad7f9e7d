"""Exception types shared across the package.

The CLI maps :class:`ValidationError` to exit code 1 and
:class:`NumericalError` to exit code 2.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class InvalidCouplingError(ValidationError):
    """A stiffness is non-positive or not finite."""


class NumericalError(ArithmeticError):
    """A numerical routine failed on input that passed validation."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization of a precision matrix failed."""
