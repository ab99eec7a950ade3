"""Backward solve of the finite-horizon equilibrium system under CRRA utility.

With U(x) = U_hat(x) = x^p / p the two coupled HJB value functions
separate as v(t, x) = f(t) x^p / p and w(t, x) = g(t) x^p / p, where
(f, g) solve the terminal-value ODE system

    f'(s) + K f(s) + (1 - p) f(s)^(p/(p-1)) = alpha1 f(s) + beta1 g(s)
    g'(s) + K g(s) - p g(s) f(s)^(1/(p-1))  = alpha2 f(s) + beta2 g(s)

on [0, T] with f(T) = 1, g(T) = 0, and

    K = r p + p mu^2 / (2 (1 - p) sigma^2).

The equilibrium policy is then a constant investment fraction
pi = mu / ((1-p) sigma^2) and a consumption fraction c(t) = f(t)^(1/(p-1)).

Integration is classical fourth-order Runge-Kutta on a uniform grid,
backward from T.  Solutions are guaranteed to exist only up to explosions,
so the solver aborts with diagnostics as soon as f leaves [1e-8, 1e8].

The module also computes the naive (commitment-assuming) consumption plan
chosen at a fixed time t, which solves the single equation

    phi'(s) + K phi(s) + (h'(s-t)/h(s-t)) phi(s) + (1-p) phi(s)^(p/(p-1)) = 0

backward from phi(T) = 1, with c_naive(s) = phi(s)^(1/(p-1)).  Unless the
discount is exponential, plans drawn at different t disagree on their
common window, which is the time inconsistency this package is about.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import discounting
from .discounting import CoefficientMatrix, DiscountSpec
from .errors import (
    BlowUpError,
    InvalidHorizonError,
    InvalidWindowError,
    NonPositiveWealthError,
    OutOfRangeError,
    ValidationError,
)
from .preferences import CrraPreferences, MarketParams, merton_fraction, risk_adjusted_return

# f outside this range means blow-up or a meaningless policy.
F_LOWER = 1e-8
F_UPPER = 1e8

MIN_STEPS = 10


def kappa(market: MarketParams, prefs: CrraPreferences) -> float:
    """K = r p + p mu^2 / (2 (1-p) sigma^2), the wealth-power drift rate."""
    return prefs.p * risk_adjusted_return(market, prefs)


@dataclass(frozen=True)
class FgSolution:
    """Backward solution (f, g) on a uniform grid over [0, horizon].

    Carries the risk exponent p so values v = f x^p / p can be formed
    without re-supplying the preferences.
    """

    horizon: float
    times: np.ndarray
    f: np.ndarray
    g: np.ndarray
    kappa_rate: float
    p: float


@dataclass(frozen=True)
class FiniteEquilibriumPolicy:
    """Constant investment fraction and the consumption-fraction curve."""

    pi_star: float
    times: np.ndarray
    consumption: np.ndarray


@dataclass(frozen=True)
class NaiveCurve:
    """Consumption fractions a time-t self would plan for s in [t, T]."""

    t: float
    times: np.ndarray
    consumption: np.ndarray


def _safe_pow(base: float, expo: float) -> float:
    # fractional powers of non-positive f signal blow-up; propagate as nan
    if base > 0.0 and math.isfinite(base):
        return base**expo
    return math.nan


def fg_derivatives(
    f: float, g: float, k_rate: float, p: float, cm: CoefficientMatrix
) -> tuple[float, float]:
    """Forward-time derivatives (f', g') of the coupled system at (f, g)."""
    fp = cm.alpha1 * f + cm.beta1 * g - k_rate * f - (1.0 - p) * _safe_pow(f, p / (p - 1.0))
    gp = cm.alpha2 * f + cm.beta2 * g - k_rate * g + p * g * _safe_pow(f, 1.0 / (p - 1.0))
    return fp, gp


def solve_fg(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    horizon: float,
    steps: int,
) -> FgSolution:
    """Integrate the (f, g) system backward from the terminal condition.

    Parameters
    ----------
    horizon : float
        Terminal time T > 0.
    steps : int
        Number of uniform grid intervals, at least 10.

    Returns
    -------
    FgSolution
        Grid times 0 = t_0 < ... < t_N = T with f, g at every node,
        f(T) = 1 and g(T) = 0 exactly.

    Raises
    ------
    BlowUpError
        If f leaves [1e-8, 1e8] at any node, or turns non-finite.
    InvalidHorizonError
        If horizon <= 0 or steps < 10.
    """
    discounting.validate(discount)
    if not horizon > 0.0:
        raise InvalidHorizonError(f"horizon must be > 0, got {horizon}")
    if steps < MIN_STEPS:
        raise InvalidHorizonError(f"need at least {MIN_STEPS} steps, got {steps}")
    if not prefs.include_terminal:
        raise ValidationError(
            "the backward system assumes terminal wealth utility (f(T) = 1)"
        )
    cm = discounting.hjb_coefficients(discount)
    k_rate = kappa(market, prefs)
    p = prefs.p
    dt = horizon / steps
    f = np.empty(steps + 1)
    g = np.empty(steps + 1)
    f[steps] = 1.0
    g[steps] = 0.0
    h = -dt
    for i in range(steps, 0, -1):
        fv, gv = f[i], g[i]
        k1f, k1g = fg_derivatives(fv, gv, k_rate, p, cm)
        k2f, k2g = fg_derivatives(fv + 0.5 * h * k1f, gv + 0.5 * h * k1g, k_rate, p, cm)
        k3f, k3g = fg_derivatives(fv + 0.5 * h * k2f, gv + 0.5 * h * k2g, k_rate, p, cm)
        k4f, k4g = fg_derivatives(fv + h * k3f, gv + h * k3g, k_rate, p, cm)
        f[i - 1] = fv + h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        g[i - 1] = gv + h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
        if not (F_LOWER <= f[i - 1] <= F_UPPER) or not math.isfinite(g[i - 1]):
            t_bad = (i - 1) * dt
            raise BlowUpError(
                f"f left [{F_LOWER:g}, {F_UPPER:g}] at t={t_bad:.6g} "
                f"(f={f[i - 1]!r}, g={g[i - 1]!r}); the system exists only up "
                f"to explosions, reduce the horizon",
                time=t_bad,
                value=f[i - 1],
            )
    times = np.arange(steps + 1) * dt
    return FgSolution(horizon=horizon, times=times, f=f, g=g, kappa_rate=k_rate, p=p)


def policy(
    sol: FgSolution, market: MarketParams, prefs: CrraPreferences
) -> FiniteEquilibriumPolicy:
    """Equilibrium policy induced by a solved (f, g) pair."""
    c = sol.f ** (1.0 / (prefs.p - 1.0))
    return FiniteEquilibriumPolicy(
        pi_star=merton_fraction(market, prefs),
        times=sol.times,
        consumption=c,
    )


def value_at(sol: FgSolution, t: float, x: float) -> tuple[float, float]:
    """(v, w) = (f(t) x^p / p, g(t) x^p / p), linear interpolation between nodes."""
    if not 0.0 <= t <= sol.horizon:
        raise OutOfRangeError(f"t must lie in [0, {sol.horizon}], got {t}")
    if not x > 0.0:
        raise NonPositiveWealthError(f"wealth must be > 0, got {x}")
    ft = float(np.interp(t, sol.times, sol.f))
    gt = float(np.interp(t, sol.times, sol.g))
    scale = x**sol.p / sol.p
    return ft * scale, gt * scale


def interp_f(sol: FgSolution, t) -> np.ndarray:
    """f linearly interpolated at times t (scalar or array) inside [0, T]."""
    return np.interp(t, sol.times, sol.f)


def naive_consumption_fraction(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    horizon: float,
    t: float,
    steps: int,
) -> NaiveCurve:
    """Consumption-fraction plan of the time-t optimizer, on s in [t, T].

    Solves phi backward from phi(T) = 1 with the age-dependent impatience
    term h'(s-t)/h(s-t) and returns c(s) = phi(s)^(1/(p-1)).  For the
    exponential family the term is constant, so curves planned at
    different t coincide as functions of s; for pseudo-exponential
    discounting they do not.
    """
    discounting.validate(discount)
    if not horizon > 0.0:
        raise InvalidHorizonError(f"horizon must be > 0, got {horizon}")
    if not 0.0 <= t < horizon:
        raise InvalidWindowError(f"need 0 <= t < T, got t={t}, T={horizon}")
    if steps < MIN_STEPS:
        raise InvalidHorizonError(f"need at least {MIN_STEPS} steps, got {steps}")
    k_rate = kappa(market, prefs)
    p = prefs.p
    dt = (horizon - t) / steps
    phi = np.empty(steps + 1)
    phi[steps] = 1.0

    def rhs(age: float, ph: float) -> float:
        return (discounting.impatience_rate(discount, age) - k_rate) * ph - (
            1.0 - p
        ) * _safe_pow(ph, p / (p - 1.0))

    h = -dt
    for i in range(steps, 0, -1):
        age = i * dt  # s - t at node i
        ph = phi[i]
        k1 = rhs(age, ph)
        k2 = rhs(age + 0.5 * h, ph + 0.5 * h * k1)
        k3 = rhs(age + 0.5 * h, ph + 0.5 * h * k2)
        k4 = rhs(age + h, ph + h * k3)
        phi[i - 1] = ph + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not (F_LOWER <= phi[i - 1] <= F_UPPER):
            t_bad = t + (i - 1) * dt
            raise BlowUpError(
                f"naive plan blew up at s={t_bad:.6g} (phi={phi[i - 1]!r})",
                time=t_bad,
                value=phi[i - 1],
            )
    times = t + np.arange(steps + 1) * dt
    return NaiveCurve(t=t, times=times, consumption=phi ** (1.0 / (p - 1.0)))


def stationary_residual(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    z: float,
) -> tuple[float, float]:
    """Derivatives of the (f, g) system at the constant candidate pair.

    A stationary consumption fraction z > 0 corresponds to f = k = z^(p-1)
    and g = alpha2 k / (K - p z - beta2).  At a genuine infinite-horizon
    equilibrium both returned derivatives vanish.
    """
    if not z > 0.0:
        raise ValidationError(f"consumption fraction must be > 0, got {z}")
    cm = discounting.hjb_coefficients(discount)
    p = prefs.p
    k_rate = kappa(market, prefs)
    denom = k_rate - p * z - cm.beta2
    if denom == 0.0:
        raise ValidationError("K - p z - beta2 = 0: constant g is undefined")
    k = z ** (p - 1.0)
    g_const = cm.alpha2 * k / denom
    return fg_derivatives(k, g_const, k_rate, p, cm)
