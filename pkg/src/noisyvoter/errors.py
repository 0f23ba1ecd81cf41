"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration (bad scenario, grid, or parameter)."""


class CapacityError(RuntimeError):
    """An exact computation exceeds its configured size cap."""


class DiagnosticError(RuntimeError):
    """A Monte Carlo diagnostic failed (insufficient budget, nonconvergence)."""
