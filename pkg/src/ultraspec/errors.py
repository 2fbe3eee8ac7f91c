"""Exception hierarchy shared by all modules."""


class UltraspecError(Exception):
    """Base class for every error raised by the package."""

    kind = "error"


class ValidationError(UltraspecError, ValueError):
    """Malformed configuration or violated precondition."""

    kind = "validation"


class RangeError(ValidationError):
    """A rank or point lies outside the admissible window of the model."""

    kind = "range"


class DivergenceError(UltraspecError, ArithmeticError):
    """A requested series or integral diverges (recurrent model, ratio >= 1)."""

    kind = "divergent"


class PoleProximityError(UltraspecError, ArithmeticError):
    """Spectral parameter too close to a pole of the resolvent series."""

    kind = "pole_proximity"


class EigenvalueHitError(UltraspecError, ArithmeticError):
    """The Krein denominator vanishes: lambda solves the secular equation."""

    kind = "eigenvalue_hit"


class ConsistencyError(UltraspecError, RuntimeError):
    """An internal numerical consistency check failed."""

    kind = "consistency"


class ConvergenceError(ConsistencyError):
    """An iterative routine did not converge within its budget."""

    kind = "convergence"
