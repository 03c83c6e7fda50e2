"""Exception hierarchy for the levy_conditioner package.

Every error raised by the package derives from LevyCondError so callers can
catch numerics problems without also swallowing programming errors.
"""


class LevyCondError(Exception):
    """Base class for all package errors."""


class ModelError(LevyCondError):
    """The characteristic exponent or its metadata is invalid."""


class ConfigError(LevyCondError):
    """A job configuration is malformed or inconsistent.

    Carries the offending field path when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class QuadratureError(LevyCondError):
    """Base class for quadrature failures."""


class QuadratureDivergence(QuadratureError):
    """Panel refinement stalled above the requested tolerance."""


class SingularOrigin(QuadratureError):
    """The integrand grows too fast near 0 to be integrable there."""


class IndeterminateTail(QuadratureError):
    """The growth order of the exponent could not be estimated from probes."""


class TailNotConvergent(QuadratureError):
    """A lattice series tail does not pass the convergence test."""


class LinearSystemError(LevyCondError):
    """Base class for hitting-system failures."""


class IllConditioned(LinearSystemError):
    """Condition number above the configured ceiling; points too close."""

    def __init__(self, message: str, condition_number: float):
        super().__init__(message)
        self.condition_number = condition_number


class NegativeProbability(LinearSystemError):
    """A solved hitting probability is negative beyond quadrature noise."""


class SimulationError(LevyCondError):
    """Base class for Monte Carlo failures."""


class NoSampler(SimulationError):
    """The model cannot generate increments (no sampler attached)."""


class ZeroDenominator(SimulationError):
    """The harmonic function vanishes at the starting point."""


class NonAbsorbed(SimulationError):
    """Too many paths exceeded the absorption horizon."""


class GridTooCoarse(SimulationError):
    """A limit trajectory has not settled over the supplied grid."""
