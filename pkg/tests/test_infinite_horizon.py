"""Stationary equilibrium enumeration, root quality, and screening flags."""

import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from mertoneq import (
    CrraPreferences,
    DivergentIntegralError,
    Exponential,
    MarketParams,
    TypeI,
    TypeII,
    ValidationError,
    WrongDiscountKindError,
    enumerate_equilibria,
    exponential_fraction,
    k_tilde,
    kappa,
    merton_baseline,
    quadratic_coefficients,
    real_roots,
    residual,
)
from mertoneq.infinite_horizon import quadratic_value


def two_equilibria_spec(p=0.55, r=0.02, mu=0.1, sigma=0.3, eps=0.01, lam=0.998):
    """The construction with rho_i = p y +/- eps that admits two equilibria."""
    y = r + mu**2 / (2 * (1 - p) * sigma**2)
    market = MarketParams(r=r, mu=mu, sigma=sigma)
    prefs = CrraPreferences(p=p)
    spec = TypeI(lam=lam, rho1=p * y + eps, rho2=p * y - eps)
    return market, prefs, spec, eps


def bisection_roots(coeffs, lo=1e-6, hi=1.0, n_scan=20001):
    """Independent root oracle: dense sign scan plus Brent refinement."""
    zs = np.linspace(lo, hi, n_scan)
    vals = [quadratic_value(coeffs, float(z)) for z in zs]
    roots = []
    for a, b, fa, fb in zip(zs[:-1], zs[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            roots.append(brentq(lambda z: quadratic_value(coeffs, z), a, b, xtol=1e-15))
    return roots


class TestQuadraticCoefficients:
    def test_two_equilibria_construction(self):
        market, prefs, spec, eps = two_equilibria_spec()
        q = quadratic_coefficients(market, prefs, spec)
        p, lam = prefs.p, spec.lam
        assert q.a == pytest.approx(0.45, rel=1e-15)
        # B = eps (1 - 2 lam) / p and C = eps^2 / p in this construction
        assert q.b == pytest.approx(eps * (1 - 2 * lam) / p, rel=1e-10)
        assert q.b == pytest.approx(-0.0181091, rel=1e-5)
        assert q.c == pytest.approx(eps**2 / p, rel=1e-10)
        assert q.c == pytest.approx(1.8181818e-4, rel=1e-7)

    def test_type2_lambda_free_c(self):
        market = MarketParams(r=0.02, mu=0.1, sigma=0.3)
        prefs = CrraPreferences(p=0.55)
        k_rate = kappa(market, prefs)
        for lam in (0.0, 0.4):
            q = quadratic_coefficients(market, prefs, TypeII(lam=lam, rho=0.2))
            assert q.c == pytest.approx(-((0.2 - k_rate) ** 2) / 0.55, rel=1e-14)

    def test_degenerate_type1_factors(self):
        # with rho1 = rho2 = delta the roots are the exponential fraction
        # and the artificial root -(delta - K)/p
        market = MarketParams(r=0.02, mu=0.1, sigma=0.3)
        prefs = CrraPreferences(p=0.5)
        delta = 0.1
        q = quadratic_coefficients(market, prefs, TypeI(lam=0.5, rho1=delta, rho2=delta))
        roots = real_roots(q)
        k_rate = kappa(market, prefs)
        want = sorted(
            [exponential_fraction(market, prefs, delta), -(delta - k_rate) / prefs.p]
        )
        assert roots == pytest.approx(want, rel=1e-12)

    def test_wrong_kind(self):
        market = MarketParams(r=0.02, mu=0.1, sigma=0.3)
        with pytest.raises(WrongDiscountKindError):
            quadratic_coefficients(market, CrraPreferences(p=0.5), Exponential(0.1))


class TestRealRoots:
    CASES = [
        (0.45, -0.0181, 1.8e-4),
        (0.5, 0.0, -0.02),
        (2.0, 1.0, -0.3),
        (0.45, -0.018109090909090908, 0.00018181818181818175),
        (1.5, 0.3, 0.2),  # no real roots
    ]

    @pytest.mark.parametrize("a,b,c", CASES)
    def test_roots_satisfy_equation(self, a, b, c):
        from mertoneq.infinite_horizon import QuadraticCoefficients

        coeffs = QuadraticCoefficients(a, b, c)
        roots = real_roots(coeffs)
        disc = b * b - 4 * a * c
        assert len(roots) == (0 if disc < 0 else (1 if disc == 0 else 2))
        for z in roots:
            tol = 1e-10 * max(abs(a * z * z), abs(b * z), abs(c), 1e-30)
            assert abs(quadratic_value(coeffs, z)) <= tol

    def test_matches_bisection_oracle(self):
        market, prefs, spec, _ = two_equilibria_spec()
        coeffs = quadratic_coefficients(market, prefs, spec)
        closed = [z for z in real_roots(coeffs) if z > 0]
        scanned = bisection_roots(coeffs)
        assert len(closed) == len(scanned) == 2
        for z_closed, z_scan in zip(closed, scanned):
            assert z_closed == pytest.approx(z_scan, rel=1e-9)


class TestEnumerateExponential:
    def test_closed_form_candidate(self):
        market = MarketParams(r=0.0, mu=0.0, sigma=0.3)
        prefs = CrraPreferences(p=0.5)
        report = enumerate_equilibria(market, prefs, Exponential(0.1))
        assert len(report.candidates) == 1
        cand = report.candidates[0]
        assert cand.z == pytest.approx(0.2, rel=1e-15)
        assert cand.k == pytest.approx(math.sqrt(5.0), rel=1e-15)
        assert cand.accepted

    def test_closed_form_formula_exact(self):
        for delta in (0.05, 0.1, 0.3):
            for p in (-1.0, 0.3, 0.55):
                market = MarketParams(r=0.02, mu=0.1, sigma=0.3)
                prefs = CrraPreferences(p=p)
                report = enumerate_equilibria(market, prefs, Exponential(delta))
                z = report.candidates[0].z
                want = (
                    delta - 0.02 * p - p * 0.1**2 / (2 * (1 - p) * 0.3**2)
                ) / (1 - p)
                assert z == pytest.approx(want, rel=1e-14)

    def test_rejected_when_weak_condition_fails(self):
        # p > 0 and delta below the weak bound makes z negative
        market = MarketParams(r=0.02, mu=0.1, sigma=0.3)
        prefs = CrraPreferences(p=0.55)
        report = enumerate_equilibria(market, prefs, Exponential(0.01))
        cand = report.candidates[0]
        assert cand.z < 0.0
        assert not cand.positive
        assert not cand.accepted
        assert math.isnan(cand.k)

    def test_merton_fraction_in_report(self):
        market = MarketParams(r=0.0, mu=0.05, sigma=0.25)
        report = enumerate_equilibria(market, CrraPreferences(p=0.5), Exponential(0.1))
        assert report.merton_fraction == pytest.approx(1.6, rel=1e-15)


class TestDegenerateTypeI:
    def test_artificial_root_rejected_by_positivity(self):
        market = MarketParams(r=0.0, mu=0.0, sigma=0.3)
        prefs = CrraPreferences(p=0.5)
        report = enumerate_equilibria(market, prefs, TypeI(lam=0.5, rho1=0.1, rho2=0.1))
        zs = sorted(c.z for c in report.candidates)
        assert zs == pytest.approx([-0.2, 0.2], rel=1e-12)
        neg = report.candidates[0]
        assert neg.z < 0 and not neg.positive and not neg.accepted

    def test_collapse_matches_exponential_accepted_set(self):
        # away from the r = mu = 0 boundary the accepted sets coincide
        market = MarketParams(r=0.02, mu=0.1, sigma=0.3)
        for p in (-1.0, 0.5):
            prefs = CrraPreferences(p=p)
            for delta in (0.1, 0.3):
                plain = enumerate_equilibria(market, prefs, Exponential(delta))
                collapsed = enumerate_equilibria(
                    market, prefs, TypeI(lam=0.5, rho1=delta, rho2=delta)
                )
                collapsed2 = enumerate_equilibria(
                    market, prefs, TypeII(lam=0.0, rho=delta)
                )
                want = sorted(c.z for c in plain.accepted)
                for rep in (collapsed, collapsed2):
                    got = sorted(c.z for c in rep.accepted)
                    assert got == pytest.approx(want, rel=1e-12)

    def test_boundary_case_is_flagged(self):
        # at r = mu = 0 the exponential root sits exactly on the strict
        # transversality bound; it is rejected but flagged as boundary
        market = MarketParams(r=0.0, mu=0.0, sigma=0.3)
        prefs = CrraPreferences(p=0.5)
        report = enumerate_equilibria(market, prefs, TypeI(lam=0.5, rho1=0.1, rho2=0.1))
        pos = [c for c in report.candidates if c.z > 0][0]
        assert pos.boundary
        assert not pos.transversal


class TestTwoEquilibria:
    def test_two_accepted_near_predicted_scale(self):
        market, prefs, spec, eps = two_equilibria_spec()
        start = time.perf_counter()
        report = enumerate_equilibria(market, prefs, spec)
        elapsed = time.perf_counter() - start
        accepted = report.accepted
        assert len(accepted) == 2
        scale = eps / math.sqrt(prefs.p * (1 - prefs.p))
        for cand in accepted:
            assert abs(cand.z - scale) <= 0.2 * scale
            assert abs(residual(market, prefs, spec, cand.z)) <= 1e-9
        assert elapsed < 0.1

    def test_roots_close_but_distinct(self):
        market, prefs, spec, _ = two_equilibria_spec()
        z1, z2 = sorted(c.z for c in enumerate_equilibria(market, prefs, spec).accepted)
        assert z1 == pytest.approx(0.0192141, rel=1e-5)
        assert z2 == pytest.approx(0.0210283, rel=1e-5)

    def test_continuity_toward_exponential(self):
        # rho_i = delta +/- eps: the accepted root approaches the
        # exponential fraction as eps shrinks
        market = MarketParams(r=0.02, mu=0.1, sigma=0.3)
        prefs = CrraPreferences(p=0.5)
        delta = 0.1
        z_exp = exponential_fraction(market, prefs, delta)
        gaps = []
        for eps in (1e-2, 1e-3, 1e-4):
            spec = TypeI(lam=0.5, rho1=delta + eps, rho2=delta - eps)
            accepted = enumerate_equilibria(market, prefs, spec).accepted
            assert len(accepted) == 1
            gaps.append(abs(accepted[0].z - z_exp))
        assert gaps[0] > gaps[1] > gaps[2]

    def test_k_tilde_consistency(self):
        market, prefs, spec, _ = two_equilibria_spec()
        k_rate = kappa(market, prefs)
        for cand in enumerate_equilibria(market, prefs, spec).candidates:
            assert cand.k_tilde == pytest.approx(
                k_rate - prefs.p * cand.z, rel=1e-12
            )

    def test_no_sign_change_away_from_roots(self):
        # residual scan over the convergent region finds sign changes only
        # in neighborhoods of the two accepted roots
        market, prefs, spec, eps = two_equilibria_spec()
        roots = sorted(c.z for c in enumerate_equilibria(market, prefs, spec).accepted)
        lo = (eps / prefs.p) * (1 + 1e-9)  # integrability needs p z > eps
        zs = np.linspace(lo, 1.0, 4000)
        vals = [residual(market, prefs, spec, float(z)) for z in zs]
        changes = [
            0.5 * (a + b)
            for a, b, fa, fb in zip(zs[:-1], zs[1:], vals[:-1], vals[1:])
            if fa * fb < 0.0
        ]
        assert len(changes) == 2
        for mid, root in zip(changes, roots):
            assert abs(mid - root) < 1e-3


class TestResidual:
    def test_zero_at_exponential_equilibrium(self):
        market = MarketParams(r=0.0, mu=0.0, sigma=0.3)
        prefs = CrraPreferences(p=0.5)
        z = enumerate_equilibria(market, prefs, Exponential(0.1)).candidates[0].z
        assert abs(residual(market, prefs, Exponential(0.1), z)) <= 1e-12

    def test_perturbed_root_has_visible_residual(self):
        market = MarketParams(r=0.0, mu=0.0, sigma=0.3)
        prefs = CrraPreferences(p=0.5)
        z = enumerate_equilibria(market, prefs, Exponential(0.1)).candidates[0].z
        assert abs(residual(market, prefs, Exponential(0.1), z * 1.1)) > 1e-4

    def test_divergent_raises(self):
        market = MarketParams(r=0.3, mu=0.0, sigma=0.3)
        prefs = CrraPreferences(p=0.9)
        # k_tilde(0.2) = 0.9 (0.3 - 0.2) = 0.09 >= delta = 0.05
        with pytest.raises(DivergentIntegralError):
            residual(market, prefs, Exponential(0.05), 0.2)

    def test_nonpositive_rejected(self):
        market = MarketParams(r=0.0, mu=0.0, sigma=0.3)
        with pytest.raises(ValidationError):
            residual(market, CrraPreferences(p=0.5), Exponential(0.1), 0.0)


class TestMertonBaseline:
    def test_negative_p_vacuous(self):
        market = MarketParams(r=0.02, mu=0.1, sigma=0.3)
        base = merton_baseline(market, CrraPreferences(p=-1.0), 0.01)
        assert base.weak_transversality and base.merton_transversality
        assert base.regime == "optimal"

    def test_intermediate_regime(self):
        # mu^2/(2 (1-p) sigma^2) = 0.16 exactly: weak bound 0.08, strong 0.12
        market = MarketParams(r=0.0, mu=0.5, sigma=1.25)
        prefs = CrraPreferences(p=0.5)
        base = merton_baseline(market, prefs, 0.1)
        assert base.weak_transversality and not base.merton_transversality
        assert base.regime == "equilibrium_only"
        assert base.candidate.accepted

    def test_both_pass(self):
        market = MarketParams(r=0.0, mu=0.5, sigma=1.25)
        base = merton_baseline(market, CrraPreferences(p=0.5), 0.15)
        assert base.weak_transversality and base.merton_transversality

    def test_no_equilibrium(self):
        market = MarketParams(r=0.0, mu=0.5, sigma=1.25)
        base = merton_baseline(market, CrraPreferences(p=0.5), 0.05)
        assert base.regime == "no_equilibrium"
        assert not base.candidate.accepted

    def test_boundary_counts_as_fail(self):
        # this sigma makes mu^2/(2 (1-p) sigma^2) exactly 0.2 in floats, so
        # delta = 0.15 sits on the strong bound 0.5 * (1.5 * 0.2) and fails;
        # delta = 0.2 clears both conditions
        market = MarketParams(r=0.0, mu=0.1, sigma=0.223606797749979)
        prefs = CrraPreferences(p=0.5)
        assert market.mu**2 / (2 * 0.5 * market.sigma**2) == 0.2
        mid = merton_baseline(market, prefs, 0.15)
        assert mid.weak_transversality and not mid.merton_transversality
        high = merton_baseline(market, prefs, 0.2)
        assert high.weak_transversality and high.merton_transversality
