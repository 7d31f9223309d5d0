"""Exception hierarchy for spatialdesign."""


class SpatialDesignError(Exception):
    """Base class for all package errors."""


class NetworkError(SpatialDesignError, ValueError):
    """Malformed network topology or unknown site/segment ids."""


class CovarianceError(SpatialDesignError, ValueError):
    """Invalid covariance parameters or a non positive definite matrix."""


class ModelError(SpatialDesignError, ValueError):
    """Inconsistent model specification or data outside the likelihood support."""


class PosteriorError(SpatialDesignError, RuntimeError):
    """Posterior approximation failure (non-finite objective, bad Hessian)."""


class UtilityError(SpatialDesignError, RuntimeError):
    """Utility estimation failed, e.g. too many degenerate posterior fits."""


class SearchError(SpatialDesignError, ValueError):
    """Invalid design search configuration."""


class EmulatorError(SpatialDesignError, RuntimeError):
    """Gaussian process emulator could not be fitted."""


class ConfigError(SpatialDesignError, ValueError):
    """Invalid run configuration file."""
