"""Exception types shared across the package."""


class RiceError(Exception):
    """Base class for package errors."""


class ConfigError(RiceError, ValueError):
    """Invalid parameter or configuration value."""


class SchemaError(RiceError, ValueError):
    """Exogenous data file does not match the documented schema."""


class ContractError(RiceError, ValueError):
    """Inputs violate a function contract (shapes, lengths, bounds)."""


class NumericalError(RiceError, ArithmeticError):
    """NaN or Inf produced during a forward or reverse sweep."""

    def __init__(self, message, t=None, variable=None):
        super().__init__(message)
        self.t = t
        self.variable = variable


class SolverError(RiceError, RuntimeError):
    """A sub-solve failed; carries the partial result when one exists."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
