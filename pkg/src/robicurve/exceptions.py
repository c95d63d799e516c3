"""Exception types raised across the package."""


class RobicurveError(Exception):
    """Base class for all package errors."""


class ConfigError(RobicurveError, ValueError):
    pass


class OracleNonconvergence(RobicurveError):
    """Adaptive quadrature hit its subdivision budget before meeting tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SolverNonconvergence(RobicurveError):
    """A root or fixed-point search stopped without meeting its tolerance.

    ``residuals`` maps equation names to the last residual values.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class SingularDesign(RobicurveError, ValueError):
    pass


class RadiusTooLarge(RobicurveError, ValueError):
    pass


class RadiusExceedsOne(RobicurveError, ValueError):
    """The per-sample contamination fraction ``r / sqrt(n)`` is above one."""


class DegenerateGenerators(RobicurveError, ValueError):
    pass


class DegenerateTangents(RobicurveError, ValueError):
    pass


class EmptySample(RobicurveError, ValueError):
    pass


class NonfiniteUpdate(RobicurveError, FloatingPointError):
    pass
