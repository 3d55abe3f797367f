from math import factorial, gamma as G

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spiralspec import (
    AssumptionViolation,
    BoundParams,
    DomainError,
    GeometryError,
    Mode,
    SyntheticGeometry,
    ThresholdVariant,
    asymptotic_bound,
    c1_constant,
    c2_term,
    constant_ratio,
    effective_potential,
    evaluate,
    lower_bound_example,
    lt_constant_1,
    lt_constant_2,
    moment_bound,
    multi_arm_bound,
    small_sigma_bound,
    sup_W,
    threshold_set,
    width_integral,
)
from spiralspec.bound import R_SIGMA, small_sigma_prefactor, threshold_endpoint

AS, CONS = ThresholdVariant.AS_STATED, ThresholdVariant.CONSERVATIVE


# -- constants ---------------------------------------------------------------------


def test_lt_constant_1_closed_forms():
    assert lt_constant_1(1.5) == pytest.approx(3 / 16, rel=1e-12)
    assert lt_constant_1(0.5) == pytest.approx(1 / 4, rel=1e-12)


@pytest.mark.parametrize("sigma", [0.5, 0.75, 1.0, 1.5, 2.0, 3.7, 10.0])
def test_lt_constant_1_gamma_identity(sigma):
    assert lt_constant_1(sigma) * np.sqrt(4 * np.pi) * G(sigma + 1.5) == pytest.approx(G(sigma + 1), rel=1e-10)


def test_lt_constant_1_decreasing():
    s = np.linspace(0.5, 40, 100)
    vals = np.array([lt_constant_1(x) for x in s])
    assert np.all(np.diff(vals) < 0)
    # Gamma(z)/Gamma(z+1/2) ~ z^{-1/2}
    assert lt_constant_1(1e4) * np.sqrt(4 * np.pi * 1e4) == pytest.approx(1.0, rel=1e-4)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 1.5, 2.0])
def test_lt_constant_2(sigma):
    assert lt_constant_2(sigma) == pytest.approx(1 / (4 * np.pi * (sigma + 1)), rel=1e-12)
    assert lt_constant_2(sigma) == pytest.approx(G(sigma + 1) / (4 * np.pi * G(sigma + 2)), rel=1e-12)


def test_lt_constant_2_examples():
    assert lt_constant_2(1.0) == pytest.approx(1 / (8 * np.pi), rel=1e-15)
    assert lt_constant_2(1.5) == pytest.approx(1 / (10 * np.pi), rel=1e-15)


def test_constant_ratio_values():
    assert constant_ratio(1.5) == pytest.approx(3 * np.sqrt(2) * np.pi, rel=1e-14)
    assert abs(constant_ratio(1.5) - 13.328648814475) <= 1e-9
    assert constant_ratio(0.5) == pytest.approx(2 * np.sqrt(2) * np.pi, rel=1e-14)


@pytest.mark.parametrize("n", range(7))
def test_constant_ratio_half_integer(n):
    dfact = np.prod(np.arange(2 * n + 1, 0, -2, dtype=float))
    closed = 2**1.5 * np.pi * dfact / factorial(n + 1)
    assert constant_ratio(n + 0.5) == pytest.approx(closed, rel=1e-12)


def test_constant_ratio_at_least_one():
    assert all(constant_ratio(s, check=False) >= 1 for s in np.linspace(0.5, 10, 60))


# -- parameters --------------------------------------------------------------------------


def test_params_mode_selection():
    assert BoundParams(1.5, 10).mode is Mode.STANDARD
    assert BoundParams(0.5, 10).mode is Mode.SMALL_SIGMA
    with pytest.raises(DomainError):
        BoundParams(1.0, 10, mode=Mode.STANDARD)
    with pytest.raises(DomainError):
        BoundParams(2.0, 10, mode=Mode.SMALL_SIGMA)
    with pytest.raises(DomainError):
        BoundParams(0.25, 10)
    with pytest.raises(DomainError):
        BoundParams(1.5, 0.0)


# -- potential -----------------------------------------------------------------------------


def test_W_zero_curvature():
    geo = SyntheticGeometry(lambda s: 1 / s, gamma_fn=lambda s: 0.0 * s)
    assert sup_W(geo) == 0.0
    assert geo.W(3.0) == 0.0


def test_W_constant_curvature():
    g0 = 0.3
    geo = SyntheticGeometry(lambda s: 1 / s, gamma_fn=lambda s: g0 + 0 * s)
    s = 2.0
    assert geo.W(s) == pytest.approx(g0**2 / (4 * (1 - g0 / s) ** 2), rel=1e-15)
    # W grows with d, and d decreases: the supremum sits at s0
    assert sup_W(geo) == pytest.approx(g0**2 / (4 * (1 - g0) ** 2), rel=1e-12)


def test_W_breakdown():
    with pytest.raises(AssumptionViolation):
        effective_potential(1.0, 0.0, 0.0, 1.5)


def test_W_power_termwise(power_cache):
    s = 2 * power_cache.s0
    cd = power_cache.curvature_arc_derivatives(s)
    d = power_cache.normal_width(s)
    q = 1 - cd.gamma * d
    hand = cd.gamma**2 / (4 * q**2) + d * abs(cd.d2gamma) / (2 * q**3) + 1.25 * d**2 * cd.dgamma**2 / q**4
    assert power_cache.potential_W(s) == pytest.approx(hand, rel=1e-14)
    assert power_cache.W(s) == pytest.approx(hand, rel=1e-5)


def test_sup_W_refinement(power_cache):
    coarse = sup_W(power_cache)
    fine = sup_W(power_cache, rtol=1e-7)
    assert coarse == pytest.approx(fine, rel=1e-4)
    assert coarse >= np.max(power_cache.nodes["W"]) * (1 - 1e-12)


def test_sup_W_tail_check():
    geo = SyntheticGeometry(lambda s: 1 / s, s_max=100.0, W_fn=lambda s: s / 100.0)
    with pytest.raises(Exception, match="not decreasing"):
        sup_W(geo)


# -- threshold sets and width integrals ------------------------------------------------------


@pytest.mark.parametrize("lam", [100.0, 1e4, 1e6])
def test_threshold_inverse_s(inv_s, lam):
    p = BoundParams(1.5, lam, AS)
    assert threshold_endpoint(inv_s, p) == pytest.approx(np.sqrt(lam) / np.pi, rel=1e-12)
    assert width_integral(inv_s, p) == pytest.approx(np.log(np.sqrt(lam) / np.pi), rel=1e-8)


def test_threshold_empty(inv_s):
    p = BoundParams(1.5, 5.0, AS)  # d(s0) sqrt(5) < pi
    assert threshold_endpoint(inv_s, p) is None
    assert width_integral(inv_s, p) == 0.0


def test_threshold_variants_nested(inv_s, power_cache):
    for geo in (inv_s, power_cache):
        for lam in (20.0, 50.0, 100.0):
            a = threshold_endpoint(geo, BoundParams(1.5, lam, AS))
            b = threshold_endpoint(geo, BoundParams(1.5, lam, CONS))
            assert b >= a
            assert width_integral(geo, BoundParams(1.5, lam, CONS)) >= width_integral(geo, BoundParams(1.5, lam, AS))


def test_threshold_non_interval_flagged():
    # d dips below the threshold and recovers before the final crossing
    d = lambda s: 1 / s + 0.5 * np.exp(-((s - 5.0) ** 2))  # noqa: E731
    geo = SyntheticGeometry(d, s0=1.0, s_max=1e4)
    ts = threshold_set(geo, 25.0, use_W=False)  # threshold d >= pi/5
    assert not ts.is_interval
    assert len(ts.intervals) == 2
    assert ts.s_star == ts.intervals[-1][1]


def test_width_integral_power_trapezoid(power_cache):
    p = BoundParams(1.5, 100.0, CONS)
    s_star = threshold_endpoint(power_cache, p)
    s = np.linspace(power_cache.s0, s_star, 400_001)
    oracle = np.trapezoid(power_cache.d(s), s)
    assert width_integral(power_cache, p) == pytest.approx(oracle, rel=1e-6)


# -- bound pieces -------------------------------------------------------------------------------


def test_c1_examples():
    assert c1_constant(SyntheticGeometry(lambda s: 1 / s, area=0.0), 1.0) == 0.0
    assert c1_constant(SyntheticGeometry(lambda s: 1 / s, area=8 * np.pi), 1.0) == pytest.approx(2.0, rel=1e-15)


def test_c1_stable_under_area_refinement(power_cache):
    a = c1_constant(power_cache, 1.5)
    b = c1_constant(power_cache, 1.5, mc_samples=160_000, seed=3)
    assert b == pytest.approx(a, rel=0.01)


def test_c2_inverse_s_closed_form(inv_s):
    lam = 1e4
    expect = 2 * 0.25 * lam * (2 * lam) ** 1.5 * np.log(np.sqrt(2 * lam) / np.pi) / (np.pi * np.sqrt(lam))
    assert c2_term(inv_s, BoundParams(1.5, lam)) == pytest.approx(expect, rel=1e-8)


def test_c2_empty(inv_s):
    assert c2_term(inv_s, BoundParams(1.5, 2.0)) == 0.0


def test_c2_growth_bounded(power_cache_big, power_cache):
    ratios = []
    for lam in (1e2, 1e3, 1e4):
        c2 = c2_term(power_cache_big, BoundParams(1.5, lam))
        ref = lam**2 * width_integral(power_cache_big, BoundParams(1.5, lam, AS))
        ratios.append(c2 / ref)
    assert max(ratios) / min(ratios) < 3.0


def test_moment_bound_assembly(power_cache):
    p = BoundParams(1.5, 50.0)
    rep = moment_bound(power_cache, p)
    wi = width_integral(power_cache, p)
    sw = sup_W(power_cache)
    area = power_cache.central_area().area
    integral = lt_constant_1(1.5) / np.pi * (sw + 50) ** 2.5 * wi
    c1 = 2 * lt_constant_2(1.5) * area * 50**2.5
    assert rep.integral_term == pytest.approx(integral, rel=1e-6)
    assert rep.c1_term == pytest.approx(c1, rel=1e-6)
    assert rep.c2_term == pytest.approx(c2_term(power_cache, p), rel=1e-12)
    assert rep.total == pytest.approx(rep.integral_term + rep.c1_term + rep.c2_term, rel=1e-15)
    assert min(rep.integral_term, rep.c1_term, rep.c2_term) >= 0
    assert rep.s_star >= power_cache.s0
    assert rep.total >= rep.integral_term


def test_moment_bound_increasing_in_lambda(power_cache):
    for v in (AS, CONS):
        t = [moment_bound(power_cache, BoundParams(1.5, lam, v)).total for lam in (20.0, 50.0, 100.0)]
        assert t[0] < t[1] < t[2]


def test_moment_bound_empty_sets():
    geo = SyntheticGeometry(lambda s: 1 / s, area=2.0)
    rep = moment_bound(geo, BoundParams(1.5, 3.0))
    assert rep.integral_term == 0 and rep.c2_term == 0
    assert rep.total == rep.c1_term > 0


@settings(max_examples=25, deadline=None)
@given(eps=st.floats(0.0, 5.0), bump=st.floats(0.01, 2.0))
def test_moment_bound_monotone_in_W(eps, bump):
    lo = SyntheticGeometry(lambda s: 1 / s, s_max=1e5, W_fn=lambda s: eps / s)
    hi = SyntheticGeometry(lambda s: 1 / s, s_max=1e5, W_fn=lambda s: (eps + bump) / s)
    p = BoundParams(1.5, 40.0)
    assert moment_bound(hi, p).total >= moment_bound(lo, p).total


def test_moment_bound_requires_standard(power_cache):
    with pytest.raises(DomainError):
        moment_bound(power_cache, BoundParams(1.0, 10.0))


# -- small sigma ------------------------------------------------------------------------------------


def test_small_sigma_prefactor():
    assert R_SIGMA == 2
    assert small_sigma_prefactor(0.5) == pytest.approx(1.0, abs=1e-15)


def test_small_sigma_bound(power_cache):
    for sg in (0.5, 1.0, 1.49):
        rep = small_sigma_bound(power_cache, BoundParams(sg, 50.0))
        assert rep.c2_term == 0
        assert np.isfinite(rep.total) and rep.total > 0
        wi = width_integral(power_cache, BoundParams(sg, 50.0))
        assert rep.integral_term == pytest.approx(
            small_sigma_prefactor(sg) / np.pi * (sup_W(power_cache) + 50) ** (sg + 1) * wi, rel=1e-12
        )
    with pytest.raises(DomainError):
        small_sigma_bound(power_cache, BoundParams(1.5, 50.0))


def test_small_sigma_empty():
    geo = SyntheticGeometry(lambda s: 1 / s, area=1.0)
    rep = small_sigma_bound(geo, BoundParams(0.5, 3.0))
    assert rep.total == rep.c1_term


# -- asymptotic form and the example lower bound ----------------------------------------------------


@pytest.mark.parametrize("sigma", [1.5, 2.5])
def test_asymptotic_inverse_s(inv_s, sigma):
    lam = 1e6
    expect = lam ** (sigma + 1) * lt_constant_1(sigma) / np.pi * np.log(np.sqrt(lam) / np.pi)
    assert asymptotic_bound(inv_s, sigma, lam) == pytest.approx(expect, rel=1e-8)


def test_asymptotic_empty(inv_s):
    assert asymptotic_bound(inv_s, 1.5, 0.9 * np.pi**2) == 0.0


def test_lower_bound_example():
    assert lower_bound_example(1.5, np.e, 0.0) == pytest.approx(np.e**2.5 / (2**4.5 * np.pi**2), rel=1e-14)
    vals = [lower_bound_example(1.5, 100.0, w) for w in (0.0, 0.3, 0.6, 0.9)]
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(DomainError):
        lower_bound_example(1.5, 100.0, 1.0)


@pytest.mark.parametrize("sigma", [1.5, 2.5])
def test_sharpness_ratio_closed_form(inv_s, sigma):
    # asymptotic/lower = constant_ratio * ln(sqrt(L)/pi) / ln(L): the ratio of the
    # two closed forms tends to constant_ratio / 2, not constant_ratio
    for lam in (1e4, 1e6, 1e10):
        r = asymptotic_bound(inv_s, sigma, lam) / lower_bound_example(sigma, lam, 0.0)
        assert r == pytest.approx(constant_ratio(sigma) * np.log(np.sqrt(lam) / np.pi) / np.log(lam), rel=1e-8)
    r = asymptotic_bound(inv_s, sigma, 1e30) / lower_bound_example(sigma, 1e30, 0.0)
    assert r == pytest.approx(constant_ratio(sigma) / 2, rel=0.05)


def test_leading_order_extraction(inv_s):
    # asymptotic / (L^{s+1} ln L) -> L_{s,1} / (2 pi)
    lam = 1e30
    lead = asymptotic_bound(inv_s, 1.5, lam) / (lam**2.5 * np.log(lam))
    assert lead == pytest.approx(lt_constant_1(1.5) / (2 * np.pi), rel=0.05)


def test_bound_to_asymptotic_ratio_decreases(power_cache_big):
    r = [moment_bound(power_cache_big, BoundParams(1.5, lam)).total / asymptotic_bound(power_cache_big, 1.5, lam)
         for lam in (1e2, 1e3, 1e4)]
    assert r[0] > r[1] > r[2] > 1


# -- multi-arm -----------------------------------------------------------------------------------------


def test_multi_arm_single_reduces(power_cache):
    p = BoundParams(1.5, 50.0)
    rep = multi_arm_bound([power_cache], p)
    assert rep.total == moment_bound(power_cache, p).total


def test_multi_arm_symmetric(two_arm_caches):
    p = BoundParams(1.5, 50.0)
    rep = multi_arm_bound(two_arm_caches, p, asymptotic=True)
    a, b = rep.arms
    assert a.total == pytest.approx(b.total, rel=1e-10)
    assert rep.total == pytest.approx(sum(evaluate(c, p).total for c in two_arm_caches), rel=1e-10)
    assert rep.asymptotic > 0


def test_multi_arm_narrower_channels(two_arm_caches, power_cache):
    # each channel of a two-arm spiral is narrower than the single-arm coil
    s = 0.5 * (two_arm_caches[0].s_max + two_arm_caches[0].s0)
    assert two_arm_caches[0].d(s) < power_cache.d(s)


def test_multi_arm_overlap():
    bad = SyntheticGeometry(lambda s: 1 / s - 0.5, s_max=100.0)
    with pytest.raises(GeometryError):
        multi_arm_bound([bad], BoundParams(1.5, 10.0))


def test_report_dict(power_cache):
    d = evaluate(power_cache, BoundParams(1.5, 20.0)).to_dict()
    assert d["threshold_variant"] == CONS.value and d["mode"] == "standard"
    assert d["total"] == pytest.approx(d["integral_term"] + d["c1_term"] + d["c2_term"])
