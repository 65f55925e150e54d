"""Exception types raised across the package."""


class FreeposError(Exception):
    """Base class for package errors."""


class DomainError(FreeposError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class UnsupportedVariant(FreeposError, TypeError):
    """The operation has no closed form for this measure family."""


class ConvergenceFailure(FreeposError, RuntimeError):
    """An iterative numeric procedure could not bracket or converge."""


class NumericalFailure(FreeposError, RuntimeError):
    """A dense linear-algebra routine failed."""


class ShapeMismatch(FreeposError, ValueError):
    """Array dimensions are incompatible."""


class NotIsometry(FreeposError, ValueError):
    """A frame expected to satisfy V*V = I does not."""


class TooLarge(FreeposError, ValueError):
    """A brute-force routine was asked for a size beyond its guard."""
