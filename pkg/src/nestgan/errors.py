"""Exception types shared across the package."""


class NestganError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(NestganError):
    """A matrix required to be positive definite has a non-positive pivot."""


class Singular(NestganError):
    """A matrix is singular or too ill-conditioned to invert reliably."""


class ConvergenceFailure(NestganError):
    """An iterative routine exhausted its iteration cap without stabilizing."""


class OutsideInvertibleRegion(NestganError):
    """A point lies outside the image of the activation's invertible region."""


class InsufficientInRegionSamples(NestganError):
    """Too few samples fall inside the invertible region to estimate from."""


class ConfigError(NestganError):
    """An experiment configuration is malformed or internally inconsistent."""
