"""CRRA utility, its convex dual, and the market primitives.

Utility is U(x) = x^p / p with risk exponent p < 1, p != 0, on wealth
x > 0.  It is strictly increasing, strictly concave, and satisfies the
Inada conditions, so the marginal utility U'(x) = x^(p-1) has a global
inverse I(y) = y^(1/(p-1)).  The Legendre transform of -U(-x),

    dual(y) = sup_{x>0} [U(x) - x y] = ((1 - p) / p) * y^(p/(p-1)),

is what enters the optimized consumption term of the HJB equations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    NonPositiveMarginalError,
    NonPositiveWealthError,
    ValidationError,
)


@dataclass(frozen=True)
class CrraPreferences:
    """Risk exponent p (p < 1, p != 0) and a flag for terminal wealth utility.

    ``include_terminal`` keeps or drops the bequest term U_hat = U in
    finite-horizon objectives; it has no effect on infinite-horizon
    quantities.
    """

    p: float
    include_terminal: bool = True

    def __post_init__(self):
        if not self.p < 1.0:
            raise ValidationError(f"risk exponent must satisfy p < 1, got p={self.p}")
        if self.p == 0.0:
            raise ValidationError("p = 0 (log utility) is not supported")


@dataclass(frozen=True)
class MarketParams:
    """Riskless rate r, excess return mu = alpha - r, and volatility sigma."""

    r: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValidationError(f"sigma must be > 0, got {self.sigma}")
        if self.mu < 0.0:
            raise ValidationError(f"mu must be >= 0, got {self.mu}")
        if self.r < 0.0:
            raise ValidationError(f"r must be >= 0, got {self.r}")


def utility(prefs: CrraPreferences, x: float) -> float:
    """U(x) = x^p / p for wealth x > 0."""
    if not x > 0.0:
        raise NonPositiveWealthError(f"wealth must be > 0, got {x}")
    return x**prefs.p / prefs.p


def marginal_utility(prefs: CrraPreferences, x: float) -> float:
    """U'(x) = x^(p-1)."""
    if not x > 0.0:
        raise NonPositiveWealthError(f"wealth must be > 0, got {x}")
    return x ** (prefs.p - 1.0)


def inverse_marginal(prefs: CrraPreferences, y: float) -> float:
    """I(y) = y^(1/(p-1)), the inverse of U', for y > 0."""
    if not y > 0.0:
        raise NonPositiveMarginalError(f"marginal utility must be > 0, got {y}")
    return y ** (1.0 / (prefs.p - 1.0))


def legendre(prefs: CrraPreferences, y: float) -> float:
    """Convex dual sup_x [U(x) - x y] = ((1-p)/p) * y^(p/(p-1)), for y > 0."""
    if not y > 0.0:
        raise NonPositiveMarginalError(f"marginal utility must be > 0, got {y}")
    p = prefs.p
    return (1.0 - p) / p * y ** (p / (p - 1.0))


def risk_adjusted_return(market: MarketParams, prefs: CrraPreferences) -> float:
    """r + mu^2 / (2 (1-p) sigma^2), the return rate entering every closed form."""
    return market.r + market.mu**2 / (2.0 * (1.0 - prefs.p) * market.sigma**2)


def merton_fraction(market: MarketParams, prefs: CrraPreferences) -> float:
    """Constant risky-asset fraction mu / ((1-p) sigma^2) held by every policy here."""
    return market.mu / ((1.0 - prefs.p) * market.sigma**2)
