"""Exception hierarchy shared by every module."""


class PolyRenewalError(Exception):
    """Base class for all package errors."""


class EmptySupport(PolyRenewalError, ValueError):
    pass


class NonZeroMean(PolyRenewalError, ValueError):
    pass


class MissingUnitSteps(PolyRenewalError, ValueError):
    pass


class NegativeWeight(PolyRenewalError, ValueError):
    pass


class EnumerationCapExceeded(PolyRenewalError, RuntimeError):
    pass


class RegionTooLarge(PolyRenewalError, MemoryError):
    pass


class UnsupportedLaw(PolyRenewalError, ValueError):
    pass


class EnvironmentCoverage(PolyRenewalError, IndexError):
    pass


class DegenerateWeights(PolyRenewalError, RuntimeError):
    pass


class LambdaNonpositive(PolyRenewalError, ValueError):
    pass


class MemoryCap(PolyRenewalError, MemoryError):
    pass


class TailTooHeavy(PolyRenewalError, ValueError):
    pass


class NewtonDivergence(PolyRenewalError, RuntimeError):
    pass


class DomainExceeded(PolyRenewalError, ValueError):
    pass


class ZeroMass(PolyRenewalError, ValueError):
    pass


class OutsideLocalDomain(PolyRenewalError, ValueError):
    pass


class DirectionNotTabulated(PolyRenewalError, ValueError):
    pass


class ScaleTooSmall(PolyRenewalError, ValueError):
    pass


class NoConePoints(PolyRenewalError, ValueError):
    pass


class InsufficientConePoints(PolyRenewalError, RuntimeError):
    pass


class TableTooCoarse(PolyRenewalError, ValueError):
    pass


class AllInfinite(PolyRenewalError, ValueError):
    pass


class OriginNotInterior(PolyRenewalError, ValueError):
    pass


class NonConvexInput(PolyRenewalError, UserWarning):
    pass


class ConeRestrictionInfeasible(PolyRenewalError, ValueError):
    pass


class KernelMismatch(PolyRenewalError, ValueError):
    pass


class InsufficientSeeds(PolyRenewalError, ValueError):
    pass


class WindowViolation(PolyRenewalError, ValueError):
    pass


class ConfigInvalid(PolyRenewalError, ValueError):
    pass


class SubcommandUnknown(PolyRenewalError, ValueError):
    pass
