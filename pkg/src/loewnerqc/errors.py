"""Exception hierarchy shared by all modules.

Every exception derives from :class:`LoewnerError`; validation-type failures
additionally derive from :class:`ValidationError` so the CLI can map them to
exit code 2, while :class:`NotConverged` maps to exit code 3.
"""


class LoewnerError(Exception):
    """Base class for all package errors."""


class ValidationError(LoewnerError, ValueError):
    """An input violates a documented invariant."""


class NumericalError(LoewnerError, ArithmeticError):
    """A numerical procedure failed."""


# numerics
class NonFiniteIntegrand(NumericalError):
    pass


class NotConverged(NumericalError):
    pass


class NotConvergedWarning(RuntimeWarning):
    pass


class InsufficientData(ValidationError):
    pass


# conformal maps
class OutOfDomain(NumericalError):
    pass


class DerivativeVanishes(NumericalError):
    pass


class NewtonDivergence(NumericalError):
    pass


# loewner chain / zipper
class StepTooLarge(NumericalError):
    pass


class NonMonotoneCapacity(ValidationError):
    pass


class CapacityStall(NumericalError):
    pass


class NotSimple(ValidationError):
    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class SegmentTooLong(NumericalError):
    pass


class NormalizationFailure(NumericalError):
    pass


class SelfIntersection(NotSimple):
    pass


# beltrami
class SupportHit(ValidationError):
    pass


class ClearanceViolated(ValidationError):
    pass


class LeftHalfPlane(ValidationError):
    pass


# energy / catalog
class RangeUncovered(ValidationError):
    pass


class UnknownFixture(ValidationError):
    pass
