"""Exception types raised across the package."""


class BCError(Exception):
    """Base class for all package errors."""


class IndeterminateForm(BCError):
    """Numerator and denominator of a rational map vanish together."""


class InvalidMap(BCError):
    pass


class RootFindingFailure(BCError):
    pass


class DerivativeVanished(BCError):
    pass


class PreconditionError(BCError):
    pass


class DomainError(BCError):
    pass


class HorizonSaturated(BCError):
    """The defining inequality still held at the scan horizon.

    ``lower_bound`` is the horizon reached, a valid lower bound for the
    true value.
    """

    def __init__(self, message, lower_bound):
        super().__init__(message)
        self.lower_bound = lower_bound


class DepthLimit(BCError):
    pass


class StartupFailure(BCError):
    pass


class InsufficientData(BCError):
    pass


class EnvelopeViolated(BCError):
    pass


class HypothesesFailed(BCError):
    def __init__(self, message, hypothesis=None):
        super().__init__(message)
        self.hypothesis = hypothesis


class BranchExhaustion(BCError):
    pass


class NumericFailure(BCError):
    pass


class ConfigError(BCError):
    pass
