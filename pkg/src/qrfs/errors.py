"""Exception types shared across the package."""


class QrfsError(Exception):
    """Base class for all package-specific failures."""


class ValidationError(QrfsError, ValueError):
    """Malformed or out-of-contract input."""


class OracleCapError(ValidationError):
    """A desk-scale verifier was asked to exceed its configured size cap."""


class RankDeficiencyError(QrfsError, ArithmeticError):
    """A triangular block became numerically singular.

    ``index`` is the offending diagonal position; ``partial`` carries whatever
    intermediate factorization was available when the failure was detected.
    """

    def __init__(self, message, index=None, partial=None):
        super().__init__(message)
        self.index = index
        self.partial = partial


class NonterminationError(QrfsError, RuntimeError):
    """The swap loop exceeded its safety cap (f too close to 1 under roundoff)."""


class NumericalFailureError(QrfsError, ArithmeticError):
    """Non-finite values appeared mid-iteration; ``iteration`` locates the step."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class DegenerateStateError(QrfsError, RuntimeError):
    """An iterate collapsed, e.g. every singular value fell below the cutoff."""
