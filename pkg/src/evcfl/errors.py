"""Exception hierarchy shared across the package."""


class EvcflError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(EvcflError, ValueError):
    """Invalid user-supplied parameter (generator params, lambda, ...)."""


class OutOfRegionError(ParameterError):
    """Point lies outside the modeled urban disc."""


class DegenerateProfileError(EvcflError, RuntimeError):
    """Profile sampling kept drawing an all-zero day (all-null level profile)."""


class ModelBuildError(EvcflError, ValueError):
    """Instance cannot be turned into a well-formed MILP (e.g. T not divisible by R_k)."""


class ScalingError(EvcflError, ValueError):
    """No usable objective-scaling divisors (both distance and cost identically zero)."""


class ExtractionError(EvcflError, RuntimeError):
    """Solver returned values that cannot be read back as a solution."""


class BackendConfigError(EvcflError, RuntimeError):
    """Requested solver backend is unknown or unavailable."""


class OracleBudgetError(EvcflError, ValueError):
    """Instance exceeds the brute-force oracle's enumeration budget or scope."""
