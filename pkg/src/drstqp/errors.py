"""Exception hierarchy shared by all modules."""


class DrstqpError(Exception):
    """Base class for every domain error raised by this package."""


class DomainError(DrstqpError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NoConvergence(DrstqpError, RuntimeError):
    pass


class NonTriangularLength(DomainError):
    pass


class NotPSD(DomainError):
    pass


class NotPD(DomainError):
    pass


class SizeMismatch(DomainError):
    pass


class ZeroDirection(DomainError):
    pass


class NotOnBoundary(DomainError):
    pass


class DimensionTooLarge(DomainError):
    pass


class DegenerateValue(DomainError):
    pass


class NonpositiveDenominator(DomainError):
    pass


class NonCopositive(DomainError):
    pass


class Diverged(DrstqpError, RuntimeError):
    """Orlicz-norm bisection found no finite bracket (the variable is not in the class)."""


class TransportGuardError(DomainError):
    """A transportation-inequality radius was requested for a model that violates it."""
