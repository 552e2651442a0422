"""Exception hierarchy for the volterra_blowup package."""


class VolterraError(Exception):
    """Base class for all package errors."""


class DomainError(VolterraError):
    """An argument lies outside the mathematical domain of an operation."""


class QuadratureError(VolterraError):
    """A quadrature did not reach the requested tolerance."""


class UndecidedError(VolterraError):
    """A convergence question could not be settled at the working ladder.

    Raised instead of returning a silently wrong number; callers that can
    live with an open verdict should catch this and degrade gracefully.
    """


class InsufficientCrossings(VolterraError):
    """Fewer geometric crossing times than blow-up estimation requires."""


class DivergentAcceleration(VolterraError):
    """Sequence acceleration failed to contract (no finite limit in sight)."""


class ConfigError(VolterraError):
    """A scenario or solver configuration is invalid."""
