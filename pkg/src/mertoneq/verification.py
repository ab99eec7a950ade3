"""Independent verification of equilibria: simulation, moments, quadrature.

The equilibrium wealth process under a constant consumption fraction z is
the geometric Brownian motion

    X(t) = x0 exp(a t + b W(t)),
    a = r + (1-2p) mu^2 / (2 (1-p)^2 sigma^2) - z,
    b = mu / ((1-p) sigma),

so paths are sampled exactly (lognormal increments, no discretization
bias).  Its p-th moment is E[X(t)^p] = x0^p exp(k_tilde t) with
k_tilde = p a + p^2 b^2 / 2 = p (r + mu^2/(2(1-p)sigma^2) - z), which is
the analytic oracle every Monte Carlo estimate here is checked against.

Random number policy
--------------------
One 64-bit master seed.  Path i draws from an independent Philox stream
keyed by the pair (seed, i); the key is the documented splitting function
and is stable across releases.  Work is cut into fixed blocks of
``BLOCK_PATHS`` paths, block partial sums use numpy's fixed-order pairwise
summation, and block partials are combined with ``math.fsum`` (exactly
rounded, hence order independent).  Together these make every estimate a
pure function of (inputs, seed), byte-identical for any worker count.

Horizon truncation of int_0^inf h(t) E[U(z X(t))] dt is controlled by the
closed-form tail bound |x0^p z^p / p| int_H^inf h(t) e^{k_tilde t} dt;
trapezoidal time quadrature adds an O(dt^2) bias that is likewise bounded
in closed form.  Both allowances enter the pass rules of the aggregated
report, never the estimates themselves.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import discounting, finite_horizon, infinite_horizon
from .discounting import DiscountSpec, Exponential, TypeI, TypeII
from .errors import (
    DivergentIntegralError,
    NonPositiveWealthError,
    OutOfRangeError,
    TailTooLargeError,
    ValidationError,
)
from .finite_horizon import FgSolution
from .preferences import CrraPreferences, MarketParams, risk_adjusted_return

WORKERS_ENV_VAR = "MERTONEQ_WORKERS"

# Fixed work-unit size; results must not depend on how blocks are scheduled.
BLOCK_PATHS = 1024

# Analytic tail target for the integral-equation quadrature check.
QUADRATURE_TAIL_TARGET = 1e-11

ADJOINT_REL_TOL = 1e-12
RESIDUAL_TOL = 1e-9
STATIONARY_TOL = 1e-10
VALUE_SIGMAS = 3.0
MOMENT_SIGMAS = 4.0


@dataclass(frozen=True)
class SimConfig:
    """Initial wealth, path/step counts, truncation horizon, and master seed."""

    x0: float
    n_paths: int
    n_steps: int
    horizon: float
    seed: int

    def __post_init__(self):
        if not self.x0 > 0.0:
            raise NonPositiveWealthError(f"x0 must be > 0, got {self.x0}")
        if self.n_paths < 1:
            raise ValidationError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.n_steps < 1:
            raise ValidationError(f"n_steps must be >= 1, got {self.n_steps}")
        if not self.horizon > 0.0:
            raise ValidationError(f"horizon must be > 0, got {self.horizon}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned int, got {self.seed}")


@dataclass(frozen=True)
class McEstimate:
    """Sample mean and standard error over n_paths independent paths."""

    mean: float
    std_error: float
    n_paths: int


@dataclass(frozen=True)
class CheckRow:
    """One verification check: target versus estimate with its pass rule."""

    check: str
    target: float
    estimate: float
    error: float
    passed: bool


def path_generator(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one path: Philox keyed by (seed, path index)."""
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _fill_normals(out: np.ndarray, seed: int, first_index: int) -> None:
    for j in range(out.shape[0]):
        out[j] = path_generator(seed, first_index + j).standard_normal(out.shape[1])


def resolve_workers(workers: int | None) -> int:
    """Explicit argument, else the MERTONEQ_WORKERS override, else 1."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV_VAR)
        workers = int(env) if env else 1
    if workers < 1:
        raise ValidationError(f"worker count must be >= 1, got {workers}")
    return workers


def _map_blocks(n_paths: int, workers: int, fn):
    """Apply fn(i0, n) over fixed path blocks; results in block order."""
    blocks = [(i0, min(BLOCK_PATHS, n_paths - i0)) for i0 in range(0, n_paths, BLOCK_PATHS)]
    if workers <= 1 or len(blocks) == 1:
        return [fn(i0, n) for i0, n in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda blk: fn(*blk), blocks))


def _mean_and_se(partials, n_paths: int) -> tuple[float, float]:
    total = math.fsum(p[0] for p in partials)
    total_sq = math.fsum(p[1] for p in partials)
    mean = total / n_paths
    if n_paths == 1:
        return mean, 0.0
    var = max(total_sq - n_paths * mean * mean, 0.0) / (n_paths - 1)
    return mean, math.sqrt(var / n_paths)


def _h_values(spec: DiscountSpec, ages: np.ndarray) -> np.ndarray:
    if isinstance(spec, Exponential):
        return np.exp(-spec.delta * ages)
    if isinstance(spec, TypeI):
        return spec.lam * np.exp(-spec.rho1 * ages) + (1.0 - spec.lam) * np.exp(
            -spec.rho2 * ages
        )
    return (1.0 + spec.lam * ages) * np.exp(-spec.rho * ages)


def _gbm_coefficients(
    market: MarketParams, prefs: CrraPreferences, z: float
) -> tuple[float, float]:
    """Log-drift a and diffusion b of the equilibrium wealth at fraction z."""
    p = prefs.p
    a = (
        market.r
        + (1.0 - 2.0 * p) * market.mu**2 / (2.0 * (1.0 - p) ** 2 * market.sigma**2)
        - z
    )
    b = market.mu / ((1.0 - p) * market.sigma)
    return a, b


def simulate_wealth(
    market: MarketParams,
    prefs: CrraPreferences,
    z: float,
    config: SimConfig,
    workers: int | None = None,
) -> np.ndarray:
    """Exact lognormal paths of the equilibrium wealth, shape (n_paths, n_steps+1).

    Each step multiplies by exp(a dt + b sqrt(dt) Z); there is no
    discretization bias at the grid nodes.  Deterministic given the seed.
    """
    if z < 0.0:
        raise ValidationError(f"consumption fraction must be >= 0, got {z}")
    workers = resolve_workers(workers)
    a, b = _gbm_coefficients(market, prefs, z)
    dt = config.horizon / config.n_steps
    out = np.empty((config.n_paths, config.n_steps + 1))
    out[:, 0] = config.x0

    def block(i0: int, n: int):
        zmat = np.empty((n, config.n_steps))
        _fill_normals(zmat, config.seed, i0)
        zmat *= b * math.sqrt(dt)
        zmat += a * dt
        np.cumsum(zmat, axis=1, out=zmat)
        np.exp(zmat, out=zmat)
        out[i0 : i0 + n, 1:] = config.x0 * zmat
        return ()

    _map_blocks(config.n_paths, workers, block)
    return out


def moment_oracle(
    market: MarketParams,
    prefs: CrraPreferences,
    z: float,
    t: float,
    x0: float = 1.0,
) -> float:
    """E[X(t)^p] = x0^p exp(k_tilde t), the exact lognormal moment."""
    if t < 0.0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if not x0 > 0.0:
        raise NonPositiveWealthError(f"x0 must be > 0, got {x0}")
    kt = infinite_horizon.k_tilde(market, prefs, z)
    return x0**prefs.p * math.exp(kt * t)


def infinite_tail_bound(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    z: float,
    x0: float,
    lower: float,
) -> float:
    """|x0^p z^p / p| int_lower^inf h(t) e^{k_tilde t} dt, in closed form."""
    p = prefs.p
    kt = infinite_horizon.k_tilde(market, prefs, z)
    scale = abs(x0**p * z**p / p)
    return scale * discounting.integral_tail(discount, kt, lower)


def horizon_for_tail(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    z: float,
    x0: float,
    tail_target: float,
) -> float:
    """Smallest power-of-two horizon whose truncation tail is below target."""
    if not tail_target > 0.0:
        raise ValidationError("tail target must be > 0")
    horizon = 1.0
    for _ in range(200):
        if infinite_tail_bound(market, prefs, discount, z, x0, horizon) < tail_target:
            return horizon
        horizon *= 2.0
    raise TailTooLargeError("no horizon below 2^200 meets the tail target")


def trapezoid_bias_bound(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    z: float,
    x0: float,
    dt: float,
) -> float:
    """Bound on the trapezoidal bias of the mean functional, (dt^2/12) int |m''|.

    The expected integrand m(t) = |scale| h(t) e^{k_tilde t} is a short sum
    of exponentials, so int_0^inf |m''| has a closed form (for type II, a
    closed-form upper bound).
    """
    p = prefs.p
    kt = infinite_horizon.k_tilde(market, prefs, z)
    scale = abs(x0**p * z**p / p)
    if isinstance(discount, Exponential):
        curv = discount.delta - kt
    elif isinstance(discount, TypeI):
        curv = discount.lam * (discount.rho1 - kt) + (1.0 - discount.lam) * (
            discount.rho2 - kt
        )
    else:
        curv = (discount.rho - kt) + 3.0 * discount.lam
    if curv < 0.0:
        raise DivergentIntegralError("integral diverges; no bias bound")
    return scale * dt**2 / 12.0 * curv


def mc_infinite_value(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    z: float,
    config: SimConfig,
    se_target: float | None = None,
    workers: int | None = None,
) -> McEstimate:
    """Monte Carlo estimate of E[int_0^inf h(t) U(z X(t)) dt], truncated at H.

    Per path, h(t) (z X(t))^p / p is integrated by the trapezoidal rule on
    the uniform step grid up to config.horizon; the estimate is the sample
    mean across paths.  At an accepted equilibrium the target value is
    v(x0) = k x0^p / p with k = z^(p-1).

    Raises DivergentIntegralError when the discounted moment integral
    diverges at this z, and TailTooLargeError when se_target is given and
    the analytic truncation tail exceeds 0.1 * se_target.
    """
    if not z > 0.0:
        raise ValidationError(f"consumption fraction must be > 0, got {z}")
    workers = resolve_workers(workers)
    p = prefs.p
    kt = infinite_horizon.k_tilde(market, prefs, z)
    if not all(rho > kt for rho in discounting.decay_rates(discount)):
        raise DivergentIntegralError(
            f"h decays too slowly against e^(k_tilde t) at z={z}"
        )
    tail = infinite_tail_bound(market, prefs, discount, z, config.x0, config.horizon)
    if se_target is not None and tail > 0.1 * se_target:
        raise TailTooLargeError(
            f"truncation tail {tail:.3e} exceeds 0.1 * se_target "
            f"({0.1 * se_target:.3e}); raise config.horizon"
        )
    dt = config.horizon / config.n_steps
    ages = np.arange(config.n_steps + 1) * dt
    weights = np.full(config.n_steps + 1, dt)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    wh = weights * _h_values(discount, ages)
    scale = config.x0**p * z**p / p
    a, b = _gbm_coefficients(market, prefs, z)
    wh0 = wh[0]
    wh_rest = wh[1:].copy()
    sqdt = math.sqrt(dt)

    def block(i0: int, n: int):
        zmat = np.empty((n, config.n_steps))
        _fill_normals(zmat, config.seed, i0)
        zmat *= b * sqdt
        zmat += a * dt
        np.cumsum(zmat, axis=1, out=zmat)
        zmat *= p
        np.exp(zmat, out=zmat)
        ys = scale * (wh0 + zmat @ wh_rest)
        return float(ys.sum()), float(np.square(ys).sum())

    partials = _map_blocks(config.n_paths, workers, block)
    mean, se = _mean_and_se(partials, config.n_paths)
    return McEstimate(mean=mean, std_error=se, n_paths=config.n_paths)


def mc_finite_value(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    sol: FgSolution,
    t: float,
    x0: float,
    config: SimConfig,
    workers: int | None = None,
) -> McEstimate:
    """Monte Carlo estimate of the finite-horizon equilibrium value at (t, x0).

    Simulates the equilibrium wealth on [t, T]: the investment fraction is
    constant, the consumption fraction c(s) = f(s)^(1/(p-1)) is frozen at
    the left node of each of config.n_steps lognormal-exact steps.  The
    per-path functional is the trapezoidal integral of
    h(s - t) U(c(s) X(s)) plus h(T - t) U_hat(X(T)); its expectation is
    value_at(sol, t, x0) up to the O(dt) freezing bias.
    """
    if not x0 > 0.0:
        raise NonPositiveWealthError(f"x0 must be > 0, got {x0}")
    if not 0.0 <= t <= sol.horizon:
        raise OutOfRangeError(f"t must lie in [0, {sol.horizon}], got {t}")
    workers = resolve_workers(workers)
    p = prefs.p
    if t == sol.horizon:
        terminal = x0**p / p if prefs.include_terminal else 0.0
        return McEstimate(mean=terminal, std_error=0.0, n_paths=config.n_paths)
    n_steps = config.n_steps
    dt = (sol.horizon - t) / n_steps
    ages = np.arange(n_steps + 1) * dt
    s_nodes = t + ages
    c_nodes = finite_horizon.interp_f(sol, s_nodes) ** (1.0 / (p - 1.0))
    hv = _h_values(discount, ages)
    weights = np.full(n_steps + 1, dt)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    # scale-free drift pieces; consumption varies per step (frozen at left node)
    base_a = (
        market.r
        + (1.0 - 2.0 * p) * market.mu**2 / (2.0 * (1.0 - p) ** 2 * market.sigma**2)
    )
    b = market.mu / ((1.0 - p) * market.sigma)
    incr_drift = (base_a - c_nodes[:-1]) * dt
    coef = weights * hv * c_nodes**p * x0**p / p
    coef_rest = coef[1:].copy()
    if prefs.include_terminal:
        coef_rest[-1] += hv[-1] * x0**p / p
    const = coef[0]
    sqdt = math.sqrt(dt)

    def block(i0: int, n: int):
        zmat = np.empty((n, n_steps))
        _fill_normals(zmat, config.seed, i0)
        zmat *= b * sqdt
        zmat += incr_drift
        np.cumsum(zmat, axis=1, out=zmat)
        zmat *= p
        np.exp(zmat, out=zmat)
        ys = const + zmat @ coef_rest
        return float(ys.sum()), float(np.square(ys).sum())

    partials = _map_blocks(config.n_paths, workers, block)
    mean, se = _mean_and_se(partials, config.n_paths)
    return McEstimate(mean=mean, std_error=se, n_paths=config.n_paths)


def adjoint_identity(
    market: MarketParams, prefs: CrraPreferences, f_t: float, x: float
) -> float:
    """mu M + sigma N for the closed-form CRRA adjoints; identically zero.

    M = f x^(p-1) is the marginal value and N = sigma F1 f (p-1) x^(p-2)
    its diffusion term at the equilibrium investment F1 = mu x/((1-p)
    sigma^2); the combination cancels symbolically, so any residual is
    floating-point noise.
    """
    if not f_t > 0.0:
        raise ValidationError(f"f value must be > 0, got {f_t}")
    if not x > 0.0:
        raise NonPositiveWealthError(f"wealth must be > 0, got {x}")
    p = prefs.p
    m_adj = f_t * x ** (p - 1.0)
    f1 = market.mu * x / ((1.0 - p) * market.sigma**2)
    n_adj = market.sigma * f1 * f_t * (p - 1.0) * x ** (p - 2.0)
    return market.mu * m_adj + market.sigma * n_adj


def _adjoint_parts(
    market: MarketParams, prefs: CrraPreferences, f_t: float, x: float
) -> tuple[float, float]:
    p = prefs.p
    m_adj = f_t * x ** (p - 1.0)
    f1 = market.mu * x / ((1.0 - p) * market.sigma**2)
    n_adj = market.sigma * f1 * f_t * (p - 1.0) * x ** (p - 2.0)
    return market.mu * m_adj, market.sigma * n_adj


def ie_quadrature_check(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    z: float,
) -> float:
    """Numerical quadrature of int_0^inf h(u) e^{k_tilde u} du minus 1/z.

    Independent of the closed-form integrals: h(u) e^{k_tilde u} is
    evaluated pointwise (with exponents combined so nothing overflows) and
    integrated by adaptive Gauss-Kronrod over geometric segments of
    [0, U_max], where U_max keeps the analytic tail below 1e-11.  At an
    accepted equilibrium the result vanishes to quadrature accuracy.
    """
    if not z > 0.0:
        raise ValidationError(f"consumption fraction must be > 0, got {z}")
    kt = infinite_horizon.k_tilde(market, prefs, z)
    if not all(rho > kt for rho in discounting.decay_rates(discount)):
        raise DivergentIntegralError(f"integral diverges at z={z}")

    if isinstance(discount, Exponential):
        d = discount.delta - kt

        def integrand(u):
            return np.exp(-d * u)

    elif isinstance(discount, TypeI):
        lam, d1, d2 = discount.lam, discount.rho1 - kt, discount.rho2 - kt

        def integrand(u):
            return lam * np.exp(-d1 * u) + (1.0 - lam) * np.exp(-d2 * u)

    else:
        lam, d = discount.lam, discount.rho - kt

        def integrand(u):
            return (1.0 + lam * u) * np.exp(-d * u)

    upper = 1.0
    while discounting.integral_tail(discount, kt, upper) > QUADRATURE_TAIL_TARGET:
        upper *= 2.0
    cuts = [0.0] + [upper / 2**j for j in reversed(range(17))]
    pieces = [
        quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        for lo, hi in zip(cuts[:-1], cuts[1:])
    ]
    return math.fsum(pieces) - 1.0 / z


def run_verification(
    market: MarketParams,
    prefs: CrraPreferences,
    discount: DiscountSpec,
    sim: SimConfig,
    fg_horizon: float | None = None,
    fg_steps: int = 400,
    workers: int | None = None,
) -> list[CheckRow]:
    """All analytic and Monte Carlo checks for one configuration.

    Rows come in a fixed order: the adjoint identity, then per accepted
    equilibrium (ascending z) the closed-form residual, the quadrature
    residual, the stationarity residual, and the Monte Carlo value match;
    then the exact-moment matches at t in {0.5, 1, 2}; finally, when a
    finite horizon is configured, the Monte Carlo check of the
    finite-horizon value at t = 0.
    """
    workers = resolve_workers(workers)
    rows: list[CheckRow] = []

    worst_rel = 0.0
    for x in (0.5, 1.0, 3.0):
        for f_t in (0.8, 1.0, 1.3):
            mm, nn = _adjoint_parts(market, prefs, f_t, x)
            denom = max(abs(mm), abs(nn), 1e-300)
            worst_rel = max(worst_rel, abs(mm + nn) / denom)
    rows.append(
        CheckRow(
            check="adjoint_identity_max_rel",
            target=0.0,
            estimate=worst_rel,
            error=worst_rel,
            passed=worst_rel <= ADJOINT_REL_TOL,
        )
    )

    report = infinite_horizon.enumerate_equilibria(market, prefs, discount)
    accepted = report.accepted
    for cand in accepted:
        z = cand.z
        tag = f"[z={z:.10g}]"
        res = infinite_horizon.residual(market, prefs, discount, z)
        rows.append(
            CheckRow(
                check=f"equilibrium_residual{tag}",
                target=0.0,
                estimate=res,
                error=abs(res),
                passed=abs(res) <= RESIDUAL_TOL,
            )
        )
        qres = ie_quadrature_check(market, prefs, discount, z)
        rows.append(
            CheckRow(
                check=f"ie_quadrature{tag}",
                target=0.0,
                estimate=qres,
                error=abs(qres),
                passed=abs(qres) <= RESIDUAL_TOL,
            )
        )
        fp, gp = finite_horizon.stationary_residual(market, prefs, discount, z)
        sres = max(abs(fp), abs(gp))
        rows.append(
            CheckRow(
                check=f"stationary_rhs{tag}",
                target=0.0,
                estimate=sres,
                error=sres,
                passed=sres < STATIONARY_TOL,
            )
        )
        target = cand.k * sim.x0**prefs.p / prefs.p
        est = mc_infinite_value(market, prefs, discount, z, sim, workers=workers)
        tail = infinite_tail_bound(market, prefs, discount, z, sim.x0, sim.horizon)
        bias = trapezoid_bias_bound(
            market, prefs, discount, z, sim.x0, sim.horizon / sim.n_steps
        )
        rows.append(
            CheckRow(
                check=f"mc_infinite_value{tag}",
                target=target,
                estimate=est.mean,
                error=est.std_error,
                passed=abs(est.mean - target)
                <= VALUE_SIGMAS * est.std_error + tail + bias,
            )
        )

    if accepted:
        z0 = accepted[0].z
        mconf = SimConfig(
            x0=sim.x0, n_paths=sim.n_paths, n_steps=4, horizon=2.0, seed=sim.seed
        )
        paths = simulate_wealth(market, prefs, z0, mconf, workers=workers)
        for node, tval in ((1, 0.5), (2, 1.0), (4, 2.0)):
            xp = paths[:, node] ** prefs.p
            sample = float(xp.mean())
            se = float(xp.std(ddof=1)) / math.sqrt(mconf.n_paths) if mconf.n_paths > 1 else 0.0
            oracle = moment_oracle(market, prefs, z0, tval, sim.x0)
            rows.append(
                CheckRow(
                    check=f"moment_match[t={tval:g}]",
                    target=oracle,
                    estimate=sample,
                    error=se,
                    passed=abs(sample - oracle)
                    <= MOMENT_SIGMAS * se + 1e-9 * abs(oracle),
                )
            )

    if fg_horizon is not None:
        sol = finite_horizon.solve_fg(market, prefs, discount, fg_horizon, fg_steps)
        est = mc_finite_value(
            market, prefs, discount, sol, 0.0, sim.x0, sim, workers=workers
        )
        v0, _ = finite_horizon.value_at(sol, 0.0, sim.x0)
        dt = fg_horizon / sim.n_steps
        rows.append(
            CheckRow(
                check="mc_finite_value[t=0]",
                target=v0,
                estimate=est.mean,
                error=est.std_error,
                passed=abs(est.mean - v0) <= VALUE_SIGMAS * est.std_error + 2.0 * dt,
            )
        )

    return rows
