"""Exception types shared across the package."""


class ShadowQfiError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(ShadowQfiError, ValueError):
    """An input violates a documented contract (shape, symmetry, range)."""


class DegenerateInputError(ShadowQfiError, ValueError):
    """A matrix collapses to zero trace under cone projection."""


class DegenerateProjectionError(DegenerateInputError):
    """A subspace projection retains essentially no trace."""


class ConfigError(ShadowQfiError, ValueError):
    """A configuration value or combination is invalid or missing."""


class FitError(ShadowQfiError, RuntimeError):
    """A regression has too few usable points."""
