"""Exception hierarchy shared by all fracim modules."""


class FracimError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(FracimError, ValueError):
    """A parameter lies outside its documented domain."""


class ContractError(FracimError):
    """A call violates an operation's precondition (e.g. backward heat flow)."""


class NumericError(FracimError, ArithmeticError):
    """Non-finite values or blow-up detected during a computation."""


class ConfigError(FracimError, ValueError):
    """A numerical configuration is inconsistent (sigma window, horizon, ...)."""


class RegimeError(FracimError):
    """The spectral regime admits no inertial manifold for the requested setup."""


class ConvergenceError(FracimError):
    """Picard iteration failed to converge; carries the update history."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class DependencyError(FracimError):
    """A required upstream artifact (e.g. stored trajectories) is missing."""


class ExtrapolationError(FracimError, ValueError):
    """A point lies outside the box a chart was built on."""


class DegenerateFitError(FracimError):
    """Not enough usable data for a least-squares fit."""
