"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An argument violated a documented precondition."""


class NumericalError(RuntimeError):
    """A quadrature or fit failed to converge; carries a residual estimate."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SamplingError(RuntimeError):
    """A rejection loop exceeded its iteration cap."""


class ConfigError(ValueError):
    """Invalid run configuration (bad key, bad value, violated constraint)."""


class CorruptedStateError(RuntimeError):
    """Non-finite particle state detected during a simulation step."""
