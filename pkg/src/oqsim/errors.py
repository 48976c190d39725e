"""Exception types shared across the package.

The CLI maps these onto exit codes, so library code should raise the
most specific type that applies.
"""


class OqsimError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(OqsimError, ValueError):
    """Operands have incompatible or non-factorizable dimensions."""


class DomainError(OqsimError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class ValidationError(OqsimError, ValueError):
    """A constructed object violates its defining invariants."""


class ParseError(OqsimError, ValueError):
    """A file or config could not be parsed."""


class IntegrationError(OqsimError, RuntimeError):
    """Time stepping produced an invalid state."""


class DivergenceError(IntegrationError):
    """Time stepping produced non-finite values."""
