"""Discount functions, their impatience rates, and HJB coupling coefficients.

Three families are supported:

    exponential  h(t) = exp(-delta t)
    type I       h(t) = lambda exp(-rho1 t) + (1 - lambda) exp(-rho2 t)
    type II      h(t) = (1 + lambda t) exp(-rho t)

All satisfy h(0) = 1, h >= 0, and integrate to a finite value on
[0, inf) under the validated parameter ranges (all rates > 0, type I
lambda in [0, 1], type II lambda >= 0).  The non-exponential families
have a non-constant impatience rate -h'(t)/h(t), which is exactly what
makes naive optimization time-inconsistent.

Each family couples the two value functions (v, w) of the equilibrium
HJB system through four constants (alpha1, alpha2, beta1, beta2); see
:func:`hjb_coefficients`.  Exponentially weighted integrals of h, which
drive the stationary equilibrium condition, have the closed forms in
:func:`exp_weighted_integral` together with their convergence conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

from .errors import (
    DivergentIntegralError,
    NegativeTimeError,
    NonPositiveRateError,
    WeightOutOfRangeError,
    ZeroDiscountWeightError,
)

# Below this, h(t) is treated as zero and the impatience rate is refused.
ZERO_WEIGHT_TOL = 1e-30


@dataclass(frozen=True)
class Exponential:
    """h(t) = exp(-delta t), delta > 0."""

    delta: float


@dataclass(frozen=True)
class TypeI:
    """h(t) = lam exp(-rho1 t) + (1 - lam) exp(-rho2 t), lam in [0, 1], rates > 0."""

    lam: float
    rho1: float
    rho2: float


@dataclass(frozen=True)
class TypeII:
    """h(t) = (1 + lam t) exp(-rho t), lam >= 0, rho > 0."""

    lam: float
    rho: float


DiscountSpec = Union[Exponential, TypeI, TypeII]


@dataclass(frozen=True)
class CoefficientMatrix:
    """Coupling constants of the two-equation HJB system for one discount family."""

    alpha1: float
    alpha2: float
    beta1: float
    beta2: float


class WeightedIntegral(NamedTuple):
    """Value of int_0^inf h(u) e^{a u} du, or inf with convergent=False."""

    value: float
    convergent: bool


def validate(spec: DiscountSpec) -> None:
    """Check positivity of rates and the weight ranges that keep h >= 0."""
    if isinstance(spec, Exponential):
        if not spec.delta > 0.0:
            raise NonPositiveRateError(f"delta must be > 0, got {spec.delta}")
    elif isinstance(spec, TypeI):
        if not (spec.rho1 > 0.0 and spec.rho2 > 0.0):
            raise NonPositiveRateError(
                f"rho1, rho2 must be > 0, got {spec.rho1}, {spec.rho2}"
            )
        if not 0.0 <= spec.lam <= 1.0:
            raise WeightOutOfRangeError(
                f"type I lambda must lie in [0, 1], got {spec.lam}"
            )
    elif isinstance(spec, TypeII):
        if not spec.rho > 0.0:
            raise NonPositiveRateError(f"rho must be > 0, got {spec.rho}")
        if spec.lam < 0.0:
            raise WeightOutOfRangeError(
                f"type II lambda must be >= 0, got {spec.lam}"
            )
    else:
        raise TypeError(f"not a discount spec: {spec!r}")


def evaluate(spec: DiscountSpec, t: float) -> float:
    """h(t) for t >= 0; h(0) = 1 for every family."""
    validate(spec)
    if t < 0.0:
        raise NegativeTimeError(f"discount functions need t >= 0, got {t}")
    if isinstance(spec, Exponential):
        return math.exp(-spec.delta * t)
    if isinstance(spec, TypeI):
        return spec.lam * math.exp(-spec.rho1 * t) + (1.0 - spec.lam) * math.exp(
            -spec.rho2 * t
        )
    return (1.0 + spec.lam * t) * math.exp(-spec.rho * t)


def impatience_rate(spec: DiscountSpec, t: float) -> float:
    """-h'(t)/h(t), the instantaneous discount rate at age t.

    Constant (= delta) only for the exponential family.  For type I it
    interpolates between the two rates, tending to min(rho1, rho2) as
    t -> inf; for type II it equals rho - lam/(1 + lam t).

    The type I expression is evaluated with the dominant exponential
    factored out, so it stays finite for large t even though h itself
    underflows.  If h(t) < 1e-30 the rate is refused.
    """
    validate(spec)
    if t < 0.0:
        raise NegativeTimeError(f"discount functions need t >= 0, got {t}")
    if isinstance(spec, Exponential):
        if math.exp(-spec.delta * t) < ZERO_WEIGHT_TOL:
            raise ZeroDiscountWeightError(f"h({t}) below {ZERO_WEIGHT_TOL}")
        return spec.delta
    if isinstance(spec, TypeI):
        lam, r1, r2 = spec.lam, spec.rho1, spec.rho2
        rm = min(r1, r2)
        # weights relative to the slowest-decaying exponential
        w1 = lam * math.exp(-(r1 - rm) * t)
        w2 = (1.0 - lam) * math.exp(-(r2 - rm) * t)
        if (w1 + w2) * math.exp(-rm * t) < ZERO_WEIGHT_TOL:
            raise ZeroDiscountWeightError(f"h({t}) below {ZERO_WEIGHT_TOL}")
        return (r1 * w1 + r2 * w2) / (w1 + w2)
    lam, rho = spec.lam, spec.rho
    if (1.0 + lam * t) * math.exp(-rho * t) < ZERO_WEIGHT_TOL:
        raise ZeroDiscountWeightError(f"h({t}) below {ZERO_WEIGHT_TOL}")
    return rho - lam / (1.0 + lam * t)


def hjb_coefficients(spec: DiscountSpec) -> CoefficientMatrix:
    """Coupling constants (alpha1, alpha2, beta1, beta2) of the HJB system.

    exponential: (delta, 0, 0, 0)
    type I:      (lam rho1 + (1-lam) rho2,  rho1 - rho2,
                  lam (1-lam) (rho1 - rho2),  lam rho2 + (1-lam) rho1)
    type II:     (rho - lam,  -lam,  lam,  rho + lam)

    With beta1 = 0 (exponential, or type I with lam in {0, 1}) the first
    equation decouples and the classical single-equation HJB is recovered.
    """
    validate(spec)
    if isinstance(spec, Exponential):
        return CoefficientMatrix(spec.delta, 0.0, 0.0, 0.0)
    if isinstance(spec, TypeI):
        lam, r1, r2 = spec.lam, spec.rho1, spec.rho2
        return CoefficientMatrix(
            alpha1=lam * r1 + (1.0 - lam) * r2,
            alpha2=r1 - r2,
            beta1=lam * (1.0 - lam) * (r1 - r2),
            beta2=lam * r2 + (1.0 - lam) * r1,
        )
    return CoefficientMatrix(
        alpha1=spec.rho - spec.lam,
        alpha2=-spec.lam,
        beta1=spec.lam,
        beta2=spec.rho + spec.lam,
    )


def exp_weighted_integral(spec: DiscountSpec, a: float) -> WeightedIntegral:
    """Closed form of int_0^inf h(u) e^{a u} du with a convergence flag.

    exponential: 1/(delta - a)                     for delta > a
    type I:      lam/(rho1 - a) + (1-lam)/(rho2-a) for min(rho1, rho2) > a
    type II:     1/(rho - a) + lam/(rho - a)^2     for rho > a

    Divergence is reported through the flag rather than an exception: the
    equilibrium enumerator treats it as "candidate rejected", not as a
    program error.
    """
    validate(spec)
    if isinstance(spec, Exponential):
        if not spec.delta > a:
            return WeightedIntegral(math.inf, False)
        return WeightedIntegral(1.0 / (spec.delta - a), True)
    if isinstance(spec, TypeI):
        if not min(spec.rho1, spec.rho2) > a:
            return WeightedIntegral(math.inf, False)
        return WeightedIntegral(
            spec.lam / (spec.rho1 - a) + (1.0 - spec.lam) / (spec.rho2 - a), True
        )
    if not spec.rho > a:
        return WeightedIntegral(math.inf, False)
    d = spec.rho - a
    return WeightedIntegral(1.0 / d + spec.lam / d**2, True)


def integral_tail(spec: DiscountSpec, a: float, lower: float) -> float:
    """Closed form of int_lower^inf h(u) e^{a u} du (truncation tail).

    Raises :class:`DivergentIntegralError` when the integral diverges.
    Used to bound horizon-truncation errors in quadrature and simulation.
    """
    validate(spec)
    if lower < 0.0:
        raise NegativeTimeError(f"tail lower bound must be >= 0, got {lower}")
    if isinstance(spec, Exponential):
        d = spec.delta - a
        if not d > 0.0:
            raise DivergentIntegralError(f"delta <= a: {spec.delta} <= {a}")
        return math.exp(-d * lower) / d
    if isinstance(spec, TypeI):
        d1, d2 = spec.rho1 - a, spec.rho2 - a
        if not (d1 > 0.0 and d2 > 0.0):
            raise DivergentIntegralError(f"min(rho1, rho2) <= a for a={a}")
        return spec.lam * math.exp(-d1 * lower) / d1 + (1.0 - spec.lam) * math.exp(
            -d2 * lower
        ) / d2
    d = spec.rho - a
    if not d > 0.0:
        raise DivergentIntegralError(f"rho <= a: {spec.rho} <= {a}")
    # int_L^inf (1 + lam u) e^{-d u} du
    return math.exp(-d * lower) * ((1.0 + spec.lam * lower) / d + spec.lam / d**2)


def decay_rates(spec: DiscountSpec) -> tuple[float, ...]:
    """Exponential rates appearing in h (one per term)."""
    validate(spec)
    if isinstance(spec, Exponential):
        return (spec.delta,)
    if isinstance(spec, TypeI):
        return (spec.rho1, spec.rho2)
    return (spec.rho,)


def dominant_rate(spec: DiscountSpec) -> float:
    """Asymptotic discount rate: the slowest exponential rate in h."""
    return min(decay_rates(spec))
