"""Exception types raised across the package."""


class ConeWalkError(Exception):
    """Base class. ``module`` tags the subsystem that raised."""

    module = "conewalk"


class ModelError(ConeWalkError, ValueError):
    module = "model"


class EmptySupport(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class SampleTooClose(ModelError):
    pass


class SingularCovariance(ModelError):
    pass


class GeometryError(ConeWalkError, ValueError):
    module = "geometry"


class OutsideCone(GeometryError):
    pass


class NotCatalogued(GeometryError):
    pass


class NotOnBoundary(GeometryError):
    pass


class KernelError(ConeWalkError, RuntimeError):
    module = "kernel"


class WindowOverflow(KernelError):
    pass


class NonSummableTailFit(KernelError):
    pass


class HarmonicError(ConeWalkError, RuntimeError):
    module = "harmonic"


class AsymptoticsError(ConeWalkError, RuntimeError):
    module = "asymptotics"


class PathLeavesRegime(AsymptoticsError):
    pass


class WrongConeVariant(AsymptoticsError):
    pass


class UnstoppedMassTooLarge(AsymptoticsError):
    pass


class ZeroDenominator(AsymptoticsError):
    pass


class TooFewPoints(AsymptoticsError):
    pass


class ConfigError(ConeWalkError, ValueError):
    module = "cli"
