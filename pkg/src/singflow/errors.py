"""Exception types raised across the package."""


class SingflowError(Exception):
    pass


class ParameterError(SingflowError, ValueError):
    pass


class DomainError(SingflowError, ValueError):
    pass


class CompositionError(SingflowError, ValueError):
    pass


class StiffnessError(SingflowError, RuntimeError):
    """Adaptive step size collapsed below the underflow floor."""


class NumericError(SingflowError, ArithmeticError):
    pass


class ExpansionError(SingflowError, ValueError):
    """A branch of a 1-D map is not expanding enough."""


class CensusUnreliableError(SingflowError, RuntimeError):
    """Too many seeds failed to converge; raise the horizon."""

    def __init__(self, message, discard_fraction=None):
        super().__init__(message)
        self.discard_fraction = discard_fraction


class ConfigError(SingflowError, ValueError):
    pass
