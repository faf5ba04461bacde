"""Exception hierarchy shared by all modules."""


class DbrError(Exception):
    """Base class for library errors."""


class DomainError(DbrError, ValueError):
    """A point lies outside the domain of the object it is passed to."""


class SingularError(DbrError, ArithmeticError):
    """A linear system required for evaluation is numerically singular."""


class ConvergenceError(DbrError, RuntimeError):
    """An extrapolation or quadrature failed its own convergence test."""


class PositivityError(DbrError, ValueError):
    """A Gram matrix failed the positive semidefiniteness check."""


class DimensionError(DbrError, ValueError):
    """Coefficient vectors or matrices have incompatible shapes."""


class DegenerateNodeError(DbrError, ValueError):
    """Two nodes coincide where a difference quotient needs them apart."""


class StabilityError(DbrError, ValueError):
    """A state matrix has spectrum outside the required region."""


class ConfigError(DbrError, ValueError):
    """Malformed experiment configuration."""
