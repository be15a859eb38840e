"""Exception hierarchy shared by the solver modules and the CLI exit-code map."""


class PressurelessError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PressurelessError, ValueError):
    """Invalid parameters or configuration (CLI exit code 2)."""


class DomainError(PressurelessError, ValueError):
    """An operation was called outside the domain where it is defined."""


class ConvergenceError(PressurelessError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance (CLI exit code 3)."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class VacuumError(ConvergenceError):
    """Conditional velocity requested where the density vanishes."""


class GeometryError(PressurelessError, RuntimeError):
    """The characteristic geometry left the regime a solver assumes."""


class AuditFailure(PressurelessError):
    """Raised by strict audits (CLI exit code 4)."""
