"""Exception types raised across the package."""


class TomoError(Exception):
    """Base class for all package errors."""


class GridMismatch(TomoError, ValueError):
    pass


class LengthMismatch(TomoError, ValueError):
    pass


class ZeroReference(TomoError, ValueError):
    pass


class GeometryInvalid(TomoError, ValueError):
    pass


class IndexOutOfRange(TomoError, IndexError):
    pass


class SubsetRequired(TomoError, ValueError):
    pass


class SubsetGranularityMismatch(TomoError, ValueError):
    pass


class AllZeroMeasurements(TomoError, ValueError):
    pass


class InvalidLambda(TomoError, ValueError):
    pass


class WeightLengthMismatch(TomoError, ValueError):
    pass


class StepSizeViolation(TomoError, ValueError):
    pass


class MissingIntensity(TomoError, ValueError):
    """PoissonWLS data term requested without measured intensities or weights."""
