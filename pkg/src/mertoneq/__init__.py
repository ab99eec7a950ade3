"""Investment and consumption without commitment, at desk scale.

Solvers and verifiers for time-consistent (subgame-perfect) policies in a
one-stock Merton market when discounting is exponential or
pseudo-exponential (a two-exponential mixture, or an exponential times a
linear factor).  CRRA utility keeps everything in closed or ODE form: the
finite-horizon equilibrium reduces to a backward two-function ODE system,
the infinite-horizon stationary equilibria to the roots of a quadratic,
and every result is cross-checked by quadrature, analytic moments, and
exact-lognormal Monte Carlo.
"""

from .discounting import (
    CoefficientMatrix,
    DiscountSpec,
    Exponential,
    TypeI,
    TypeII,
    WeightedIntegral,
    dominant_rate,
    evaluate,
    exp_weighted_integral,
    hjb_coefficients,
    impatience_rate,
    integral_tail,
    validate,
)
from .errors import (
    BlowUpError,
    ConfigParseError,
    DivergentIntegralError,
    InvalidHorizonError,
    InvalidWindowError,
    MertonEqError,
    NegativeTimeError,
    NonPositiveMarginalError,
    NonPositiveRateError,
    NonPositiveWealthError,
    OutOfRangeError,
    TailTooLargeError,
    ValidationError,
    WeightOutOfRangeError,
    WrongDiscountKindError,
    ZeroDiscountWeightError,
)
from .finite_horizon import (
    FgSolution,
    FiniteEquilibriumPolicy,
    NaiveCurve,
    kappa,
    naive_consumption_fraction,
    policy,
    solve_fg,
    stationary_residual,
    value_at,
)
from .infinite_horizon import (
    EquilibriumCandidate,
    EquilibriumReport,
    MertonBaseline,
    QuadraticCoefficients,
    enumerate_equilibria,
    exponential_fraction,
    k_tilde,
    merton_baseline,
    quadratic_coefficients,
    real_roots,
    residual,
)
from .preferences import (
    CrraPreferences,
    MarketParams,
    inverse_marginal,
    legendre,
    marginal_utility,
    merton_fraction,
    risk_adjusted_return,
    utility,
)
from .verification import (
    CheckRow,
    McEstimate,
    SimConfig,
    adjoint_identity,
    horizon_for_tail,
    ie_quadrature_check,
    infinite_tail_bound,
    mc_finite_value,
    mc_infinite_value,
    moment_oracle,
    run_verification,
    simulate_wealth,
    trapezoid_bias_bound,
)

__version__ = "0.1.0"
