"""Exception types shared across the package."""


class HarchowError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(HarchowError):
    """A matrix required to be positive definite is rank deficient."""


class Unstable(HarchowError):
    """An autoregressive matrix has spectral radius at or above one."""


class RegimeTooSmall(HarchowError):
    """A break fraction leaves one regime with too few observations."""


class BreakTooExtreme(HarchowError):
    """The break-kernel matrix needs at least two points per regime."""


class KTooSmall(HarchowError):
    """Fewer basis functions than restrictions under test."""


class DegenerateSimulation(HarchowError):
    """Too many replications produced singular weighting matrices."""
