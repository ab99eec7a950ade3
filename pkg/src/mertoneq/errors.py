"""Exception types shared across the package.

Validation failures subclass :class:`ValidationError` (itself a
``ValueError``) so callers can catch one type for "bad inputs" while the
specific classes keep diagnostics precise.  Numerical failures that arise
from legitimate inputs (blow-up, divergent integrals, insufficient
truncation horizons) get their own branch under :class:`MertonEqError`.
"""


class MertonEqError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MertonEqError, ValueError):
    """Some input violates a documented precondition or type invariant."""


class NonPositiveRateError(ValidationError):
    """A discount rate (delta, rho, rho1, rho2) must be strictly positive."""


class WeightOutOfRangeError(ValidationError):
    """Discount weight out of range (type I needs lambda in [0, 1], type II lambda >= 0)."""


class NegativeTimeError(ValidationError):
    """Discount functions are defined for t >= 0 only."""


class NonPositiveWealthError(ValidationError):
    """Utility and policies are defined for strictly positive wealth."""


class NonPositiveMarginalError(ValidationError):
    """Inverse marginal utility and the convex dual need y > 0."""


class InvalidHorizonError(ValidationError):
    """Bad horizon or step count for a backward solve."""


class InvalidWindowError(ValidationError):
    """A planning window [t, T] must satisfy 0 <= t < T."""


class OutOfRangeError(ValidationError):
    """Query point outside the solved grid."""


class WrongDiscountKindError(ValidationError):
    """Operation only applies to a specific discount family."""


class ZeroDiscountWeightError(MertonEqError):
    """h(t) vanished (below 1e-30), so the impatience rate h'(t)/h(t) is undefined."""


class BlowUpError(MertonEqError):
    """The backward solve left the trusted range; solutions exist only up to explosions.

    Attributes
    ----------
    time : float
        Grid time at which the bound was violated.
    value : float
        Offending value of f (may be nan).
    """

    def __init__(self, message, time=None, value=None):
        super().__init__(message)
        self.time = time
        self.value = value


class DivergentIntegralError(MertonEqError):
    """The discounted integral diverges; no admissible equilibrium at this rate."""


class TailTooLargeError(MertonEqError):
    """Truncation horizon too short for the requested precision."""


class ConfigParseError(ValidationError):
    """Malformed run configuration; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
