"""Stationary equilibrium consumption fractions for the infinite horizon.

Under CRRA utility a stationary equilibrium policy invests the constant
fraction mu / ((1-p) sigma^2) in the risky asset and consumes a constant
fraction z of wealth.  Writing k = z^(p-1) for the value coefficient
(v(x) = k x^p / p) and

    k_tilde = p (r + mu^2 / (2 (1-p) sigma^2) - z),

the fixed-point condition is the integral equation

    1 / z = int_0^inf h(u) exp(k_tilde u) du,

which requires every exponential rate of h to exceed k_tilde.  For the
exponential family this pins down a single closed-form candidate; for the
pseudo-exponential families, after clearing denominators, z solves a
quadratic

    Q(z) = A z^2 + B z + C = 0,   A = 1 - p,

whose real roots (0, 1 or 2 of them) are the candidates.  Each candidate
is screened by three strict conditions: positivity z > 0, integrability
rho_i > k_tilde, and the transversality bound

    z < r + (rho_i - (2p-1) mu^2 / (2 (1-p) sigma^2)) / (1 - p)

for every rate rho_i of the family.  Both roots can survive: with
rho_1 = p y + eps, rho_2 = p y - eps (y the risk-adjusted return) and the
type I weight lambda just above (1 + sqrt(4 p (1-p))) / 2, the two roots
sit near eps / sqrt(p (1-p)) and both pass every filter, so the market
admits two distinct equilibrium policies.

The quadratic is solved in the cancellation-free form (the two nearly
coincident roots above are exactly the case where the naive formula loses
digits) and each root is polished by one Newton step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import discounting
from .discounting import DiscountSpec, Exponential, TypeI, TypeII
from .errors import (
    DivergentIntegralError,
    NonPositiveRateError,
    ValidationError,
    WrongDiscountKindError,
)
from .finite_horizon import kappa
from .preferences import (
    CrraPreferences,
    MarketParams,
    merton_fraction,
    risk_adjusted_return,
)


@dataclass(frozen=True)
class QuadraticCoefficients:
    """Q(z) = a z^2 + b z + c with a = 1 - p > 0."""

    a: float
    b: float
    c: float


@dataclass(frozen=True)
class EquilibriumCandidate:
    """A real root z of the stationarity condition with its screening flags.

    ``boundary`` marks candidates sitting exactly on one of the strict
    inequalities; they are rejected (conditions are strict) but flagged so
    reports can distinguish "failed" from "degenerate".
    """

    z: float
    k: float
    k_tilde: float
    positive: bool
    integrable: bool
    transversal: bool
    merton_transversal: bool
    boundary: bool = False

    @property
    def accepted(self) -> bool:
        return self.positive and self.integrable and self.transversal


@dataclass(frozen=True)
class EquilibriumReport:
    """All real candidates (accepted or not) for one discount spec."""

    discount: DiscountSpec
    candidates: tuple[EquilibriumCandidate, ...]
    merton_fraction: float

    @property
    def accepted(self) -> tuple[EquilibriumCandidate, ...]:
        return tuple(c for c in self.candidates if c.accepted)


@dataclass(frozen=True)
class MertonBaseline:
    """Exponential-discount candidate with the weak and strong growth conditions.

    ``weak_transversality`` (delta > (p v 0) [mu^2/(2(1-p)sigma^2) + r]) is
    what existence of the equilibrium policy needs; the stronger classical
    condition ``merton_transversality`` (delta > (p v 0)
    [(2-p) mu^2/(2(1-p)sigma^2) + r]) is what the verification argument for
    the dynamic-programming optimum needs.  In between, the equilibrium
    policy exists but optimality of the Merton policy cannot be verified.
    """

    candidate: EquilibriumCandidate
    weak_transversality: bool
    merton_transversality: bool

    @property
    def regime(self) -> str:
        if self.merton_transversality:
            return "optimal"
        if self.weak_transversality:
            return "equilibrium_only"
        return "no_equilibrium"


def quadratic_coefficients(
    market: MarketParams, prefs: CrraPreferences, discount: DiscountSpec
) -> QuadraticCoefficients:
    """Coefficients of Q(z) for type I or type II discounting."""
    discounting.validate(discount)
    p = prefs.p
    y = risk_adjusted_return(market, prefs)
    k_rate = kappa(market, prefs)  # = p y
    if isinstance(discount, TypeI):
        lam, r1, r2 = discount.lam, discount.rho1, discount.rho2
        b = (2.0 * p - 1.0) * y + (lam * r2 + (1.0 - lam) * r1) / p - (r1 + r2)
        c = -(r1 - k_rate) * (r2 - k_rate) / p
        return QuadraticCoefficients(1.0 - p, b, c)
    if isinstance(discount, TypeII):
        lam, rho = discount.lam, discount.rho
        b = (2.0 * p - 1.0) * y + rho * (1.0 - 2.0 * p) / p + lam / p
        c = -((rho - k_rate) ** 2) / p
        return QuadraticCoefficients(1.0 - p, b, c)
    raise WrongDiscountKindError(
        "the quadratic applies to pseudo-exponential discounting; "
        "the exponential family has the closed form"
    )


def quadratic_value(coeffs: QuadraticCoefficients, z: float) -> float:
    """Q(z), evaluated Horner style."""
    return (coeffs.a * z + coeffs.b) * z + coeffs.c


def real_roots(coeffs: QuadraticCoefficients) -> tuple[float, ...]:
    """Real roots of Q, ascending, via the stable formula plus a Newton polish.

    The discriminant form q = -(b + sign(b) sqrt(b^2 - 4ac)) / 2 avoids the
    subtractive cancellation of the textbook formula when the roots are
    nearly coincident; one Newton step then recovers the last bits.
    """
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    if a == 0.0:
        raise ValidationError("leading coefficient a = 1 - p must be nonzero")
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return ()
    if disc == 0.0:
        roots = [-b / (2.0 * a)]
    else:
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        if q == 0.0:  # b == 0 and c == 0
            roots = [0.0, 0.0]
        else:
            roots = [q / a, c / q]

    def polish(z: float) -> float:
        dq = 2.0 * a * z + b
        if dq == 0.0:
            return z
        z1 = z - quadratic_value(coeffs, z) / dq
        if abs(quadratic_value(coeffs, z1)) <= abs(quadratic_value(coeffs, z)):
            return z1
        return z

    return tuple(sorted(polish(z) for z in roots))


def k_tilde(market: MarketParams, prefs: CrraPreferences, z: float) -> float:
    """k_tilde = p (r + mu^2/(2(1-p)sigma^2) - z); equals K - p z."""
    return prefs.p * (risk_adjusted_return(market, prefs) - z)


def merton_conditions(
    market: MarketParams, prefs: CrraPreferences, delta: float
) -> tuple[bool, bool]:
    """(weak, strong) growth conditions on an exponential rate delta."""
    p = prefs.p
    m = market.mu**2 / (2.0 * (1.0 - p) * market.sigma**2)
    pv0 = max(p, 0.0)
    weak = delta > pv0 * (m + market.r)
    strong = delta > pv0 * ((2.0 - p) * m + market.r)
    return weak, strong


def _candidate(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    z: float,
) -> EquilibriumCandidate:
    p = prefs.p
    kt = k_tilde(market, prefs, z)
    k = z ** (p - 1.0) if z > 0.0 else math.nan
    rates = discounting.decay_rates(discount)
    boundary = z == 0.0 or any(rho == kt for rho in rates)
    integrable = all(rho > kt for rho in rates)
    if isinstance(discount, Exponential):
        # M(t) decays like exp(-(r + mu^2/(2 sigma^2)) t) at the closed-form
        # candidate, so the adjoint transversality holds with no extra bound.
        transversal = True
    else:
        m2 = (2.0 * p - 1.0) * market.mu**2 / (2.0 * (1.0 - p) * market.sigma**2)
        bounds = [market.r + (rho - m2) / (1.0 - p) for rho in rates]
        transversal = all(z < bound for bound in bounds)
        boundary = boundary or any(z == bound for bound in bounds)
    _, strong = merton_conditions(market, prefs, discounting.dominant_rate(discount))
    return EquilibriumCandidate(
        z=z,
        k=k,
        k_tilde=kt,
        positive=z > 0.0,
        integrable=integrable,
        transversal=transversal,
        merton_transversal=strong,
        boundary=boundary,
    )


def exponential_fraction(
    market: MarketParams, prefs: CrraPreferences, delta: float
) -> float:
    """Closed-form z = (delta - r p - p mu^2/(2(1-p)sigma^2)) / (1-p)."""
    p = prefs.p
    return (
        delta - market.r * p - p * market.mu**2 / (2.0 * (1.0 - p) * market.sigma**2)
    ) / (1.0 - p)


def enumerate_equilibria(
    market: MarketParams, prefs: CrraPreferences, discount: DiscountSpec
) -> EquilibriumReport:
    """All stationary candidates for the given discount, with screening flags.

    Exponential discounting yields the single closed-form candidate; the
    pseudo-exponential families yield the real roots of their quadratic.
    An empty accepted set is a legitimate outcome, not an error.
    """
    discounting.validate(discount)
    if isinstance(discount, Exponential):
        zs: tuple[float, ...] = (exponential_fraction(market, prefs, discount.delta),)
    else:
        zs = real_roots(quadratic_coefficients(market, prefs, discount))
    cands = tuple(_candidate(market, prefs, discount, z) for z in zs)
    return EquilibriumReport(
        discount=discount,
        candidates=cands,
        merton_fraction=merton_fraction(market, prefs),
    )


def residual(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    z: float,
) -> float:
    """1/z minus the discounted integral at k_tilde(z); zero at equilibria.

    Note 1/z equals k^(1/(1-p)) for k = z^(p-1), so this is the defect of
    the integral equation.  Raises :class:`DivergentIntegralError` when the
    integral diverges at this z.
    """
    if not z > 0.0:
        raise ValidationError(f"consumption fraction must be > 0, got {z}")
    integral = discounting.exp_weighted_integral(discount, k_tilde(market, prefs, z))
    if not integral.convergent:
        raise DivergentIntegralError(f"integral diverges at z={z}")
    return 1.0 / z - integral.value


def merton_baseline(
    market: MarketParams, prefs: CrraPreferences, delta: float
) -> MertonBaseline:
    """Exponential-discount candidate plus the weak and strong conditions."""
    if not delta > 0.0:
        raise NonPositiveRateError(f"delta must be > 0, got {delta}")
    spec = Exponential(delta)
    cand = _candidate(market, prefs, spec, exponential_fraction(market, prefs, delta))
    weak, strong = merton_conditions(market, prefs, delta)
    return MertonBaseline(
        candidate=cand, weak_transversality=weak, merton_transversality=strong
    )
