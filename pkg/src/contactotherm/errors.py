"""Exception types raised across the package."""


class ContactothermError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(ContactothermError, ValueError):
    pass


class DomainError(ContactothermError, ValueError):
    """An elementary function was evaluated outside its domain."""

    def __init__(self, function, message):
        self.function = function
        super().__init__(f"{function}: {message}")


class SingularityError(ContactothermError, ArithmeticError):
    """A Jacobian or metric that must be invertible is (numerically) singular."""


class UnsupportedOperationError(ContactothermError, TypeError):
    pass


class InfeasibleTargetError(ContactothermError):
    """Requested averages are not reachable by any finite set of multipliers."""


class NonConvergenceError(ContactothermError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (last residual {residual:.3e})")


class ModelFormatError(ContactothermError, ValueError):
    pass
