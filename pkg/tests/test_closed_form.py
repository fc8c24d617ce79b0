from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlbs.closed_form import (ClosedFormParams, GroupElement, apply_group, asymptotic_large_S,
                              asymptotic_small_S, exceptional_y, family_surface, greeks, group_invariants,
                              group_point, invariant_u, invariant_y, ode_residual_v, ode_residual_y,
                              ode_residual_y_dyz, reduce_coords, surface_residual, surface_residual_mp,
                              trivial_u)
from nlbs.errors import DegenerateFamily, DomainError
from nlbs.fd import linear_bs_price
from nlbs.model import MarketParams, Strangle, degenerate_surface
from nlbs.numdiff import derivative

BENCH = MarketParams(0.35, 0.1)

# Values of the family from a 50-digit mpmath transcription written
# independently of the package: literal square and cube roots, |x|^{4/3}
# taken as (x^4)^{1/3}, no cancellation-avoiding rearrangement.
FROZEN = [
    ((0.5, 0.3), (0.35, 0.1), dict(m=0.5), 9.7097647338749988946, 1e-13),
    ((1.5, 0.8), (0.35, 0.1), dict(m=0.5), 80.723231173745762622, 1e-13),
    ((40.0, 0.5), (0.28, 1.0), dict(m=8.5), 155.08949493705722577, 1e-13),
    ((0.02, 0.0), (0.2, 0.3), dict(m=-1.7), -7.1143491512774740334, 1e-13),
    # d2 = 295139 against a value of about 33: cancellation limits float accuracy
    ((11.1, 0.0), (0.25, 0.05), dict(m=1338.0, d1=140.0, d2=295139.0), 32.566095544380881599, 1e-10),
]


@pytest.mark.parametrize("point, market, params, expected, rel", FROZEN)
def test_family_matches_independent_transcription(point, market, params, expected, rel):
    value = invariant_u(*point, ClosedFormParams(**params), MarketParams(*market))
    assert value == pytest.approx(expected, rel=rel)


def test_reduce_coords():
    assert reduce_coords(1.0, 0.0, 0.3) == 0.0
    assert reduce_coords(math.e, 0.0, 0.7) == pytest.approx(1.0, rel=1e-15)
    assert reduce_coords(2.0, 1.0, 0.35**2 / 8) == pytest.approx(math.log(2) - 0.0153125, rel=1e-15)
    with pytest.raises(DomainError):
        reduce_coords(0.0, 0.0, 0.1)


def test_parameter_validation():
    with pytest.raises(DomainError):
        ClosedFormParams(0.5, eps2=0)
    with pytest.raises(DomainError):
        ClosedFormParams(0.5, delta=-1.0)
    with pytest.raises(DomainError):
        invariant_u(1.0, 0.0, ClosedFormParams(0.5, delta=BENCH.sigma**2 / 4), BENCH)
    with pytest.raises(DegenerateFamily):
        invariant_u(1.0, 0.0, ClosedFormParams(0.0), BENCH)
    with pytest.raises(DomainError):
        invariant_u(-1.0, 0.0, ClosedFormParams(0.5), BENCH)
    with pytest.raises(DomainError):
        invariant_u(1.0, 0.0, ClosedFormParams(0.5), MarketParams(0.35, 0.0))
    # pinned delta equal to sigma^2/8 is accepted
    assert invariant_u(1.0, 0.0, ClosedFormParams(0.5, delta=BENCH.sigma**2 / 8), BENCH) == invariant_u(
        1.0, 0.0, ClosedFormParams(0.5), BENCH)


# -- explicit y(z) -----------------------------------------------------------------


def test_y_at_m_zero_is_minus_three_over_rho():
    z = np.linspace(-5.0, 5.0, 11)
    assert np.all(invariant_y(z, ClosedFormParams(0.0), BENCH) == -30.0)


@given(st.floats(-6.0, 4.0), st.floats(0.01, 2000.0))
def test_y_is_even_in_m(z, m):
    a = invariant_y(z, ClosedFormParams(m), BENCH)
    b = invariant_y(z, ClosedFormParams(-m), BENCH)
    assert a == pytest.approx(b, rel=1e-14)


@pytest.mark.parametrize("m", [0.5, 1.0, 8.5])
@pytest.mark.parametrize("z", [-2.0, 0.0, 1.5])
def test_y_satisfies_first_order_ode(m, z):
    params, delta = ClosedFormParams(m), BENCH.sigma**2 / 8
    y = invariant_y(z, params, BENCH)
    y_z = derivative(lambda x: invariant_y(x, params, BENCH), z, order=1, h=1e-2, accuracy=8)
    scale = y_z**2 + y**2
    assert abs(ode_residual_y(y, y_z, BENCH, delta)) / scale < 1e-8


def test_y_is_derivative_of_reduced_variable():
    params = ClosedFormParams(0.5)
    z = 0.3
    v = lambda x: -invariant_u(np.exp(x), 0.0, params, BENCH) / np.exp(x)  # noqa: E731
    v_z = derivative(v, z, order=1, h=1e-2, accuracy=8)
    assert invariant_y(z, params, BENCH) == pytest.approx(v_z, rel=1e-9)


# -- family properties ------------------------------------------------------------


@given(st.floats(0.01, 50.0), st.floats(0.0, 1.0), st.floats(0.05, 2000.0), st.floats(0.05, 0.5),
       st.floats(0.01, 1.0))
@settings(max_examples=80)
def test_family_even_in_m_and_independent_of_eps1(S, t, m, sigma, rho):
    market = MarketParams(sigma, rho)
    u = invariant_u(S, t, ClosedFormParams(m), market)
    assert invariant_u(S, t, ClosedFormParams(-m), market) == u
    assert invariant_u(S, t, ClosedFormParams(m), market, eps1=-1) == u


def test_family_float_evaluation_matches_mpmath():
    params = ClosedFormParams(8.5, 0.3, -1.0)
    for S, t in [(0.05, 0.1), (3.0, 0.9), (30.0, 0.5)]:
        with mpmath.workdps(40):
            exact = float(invariant_u(mpmath.mpf(S), mpmath.mpf(t), params, BENCH))
        assert invariant_u(S, t, params, BENCH) == pytest.approx(exact, rel=1e-13)


def test_family_surface_near_origin():
    """The fig1 scenario member: convex near the origin and tending to ``-|m|^{4/3} e^{delta t}/rho``."""
    params = ClosedFormParams(0.5)
    S = np.linspace(0.02, 0.3, 15)
    g = greeks(family_surface(params), S, 0.5, BENCH)
    assert np.all(g["gamma"] > 0)
    limit = -(0.5 ** (4 / 3)) * math.exp(BENCH.sigma**2 / 8 * 0.5) / BENCH.rho
    assert invariant_u(1e-12, 0.5, params, BENCH) == pytest.approx(limit, rel=1e-6)


def test_strangle_like_member_is_v_shaped():
    """The fig2 scenario member has a single interior minimum, like the linear strangle it is set against."""
    params = ClosedFormParams(1338.0, 140.0, 295139.0)
    market = MarketParams(0.25, 0.05)
    S = np.linspace(5.0, 30.0, 101)
    u = invariant_u(S, 0.0, params, market)
    lin = linear_bs_price(Strangle(15.0, 20.0), S, 0.0, MarketParams(0.25, 0.0, 0.02), 1.0)
    for curve in (u, lin):
        k = int(np.argmin(curve))
        assert 0 < k < S.size - 1
        assert np.all(np.diff(curve[: k + 1]) < 0) and np.all(np.diff(curve[k:]) > 0)


def test_mp_residual_of_family_member():
    surface = lambda S, t: invariant_u(S, t, ClosedFormParams(0.5), BENCH)  # noqa: E731
    assert surface_residual_mp(surface, 1.0, 0.5, BENCH) < 1e-30
    # the degenerate surface is not a solution: u_t = 0 but the diffusion term is not
    off = lambda S, t: 2.0 * S * S + 0 * t  # noqa: E731
    assert surface_residual_mp(off, 1.0, 0.5, BENCH) == pytest.approx(1.0)


# -- trivial and exceptional solutions ------------------------------------------------


def test_trivial_solutions():
    assert trivial_u(3.0, 0.4, BENCH, variant="linear", c1=2.0) == 6.0
    sigma, rho = 0.3, 0.2
    market = MarketParams(sigma, rho)
    delta = sigma**2 / 2
    S = np.array([0.5, 2.0])
    expected = 2.0 / rho * (S * np.log(S) - delta * S * 0.7)
    assert trivial_u(S, 0.7, market, variant="loglinear", sign=1, delta=delta) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(DomainError):
        trivial_u(1.0, 0.0, market, variant="loglinear", delta=0.0)
    with pytest.raises(ValueError):
        trivial_u(1.0, 0.0, market, variant="quadratic")


@pytest.mark.parametrize("sign", [1, -1])
def test_loglinear_solution_residual_by_finite_differences(sign):
    market = MarketParams(0.3, 0.2)
    surface = lambda S, t: trivial_u(S, t, market, variant="loglinear", sign=sign, delta=0.04, d0=0.3)  # noqa: E731
    S = np.linspace(0.2, 5.0, 9)
    res, _ = surface_residual(surface, S, 0.5, market)
    assert np.all(np.abs(res) < 1e-8)


def test_exceptional_solution():
    assert exceptional_y(0.35**2 / 8, 0.35, 0.1) == pytest.approx(10.0, rel=1e-15)
    assert exceptional_y(0.35**2 / 4, 0.35, 0.1) is None
    # v = z/rho + c corresponds to the lower-sign log-linear solution at delta = sigma^2/8
    sigma, rho, c = 0.35, 0.1, 0.25
    delta = sigma**2 / 8
    S, t = np.array([0.3, 1.0, 4.0]), 0.6
    from_v = -S * (reduce_coords(S, t, delta) / rho + c)
    trivial = trivial_u(S, t, MarketParams(sigma, rho), variant="loglinear", sign=-1, delta=delta, d0=-c)
    assert from_v == pytest.approx(trivial, rel=1e-14)


def test_reduced_ode_residuals_at_known_solutions():
    delta = 0.05
    market = MarketParams(0.4, 0.2)
    root = math.sqrt(market.sigma**2 / (2 * delta))
    assert ode_residual_v(1.0, 0.0, 0.0, market, delta) == 0.0
    for sign in (1, -1):
        v_z = -(1 + sign * root) / market.rho
        assert ode_residual_v(0.0, v_z, 0.0, market, delta) == pytest.approx(0.0, abs=1e-12)
        y = (-1 + sign * root) / market.rho
        assert ode_residual_y(y, 0.0, market, delta) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        ode_residual_v(0.0, 1.0, 1.0, market, 0.0)
    with pytest.raises(ZeroDivisionError):
        ode_residual_y(0.0, 1.0, market, delta)


def test_discriminant_point():
    delta = BENCH.sigma**2 / 8
    y = 1.0 / BENCH.rho
    assert ode_residual_y(y, 0.0, BENCH, delta) == pytest.approx(0.0, abs=1e-12)
    assert ode_residual_y_dyz(y, 0.0, BENCH, delta) == pytest.approx(0.0, abs=1e-12)


# -- symmetry group --------------------------------------------------------------------


def test_group_examples():
    zero = lambda S, t: 0.0 * np.asarray(S)  # noqa: E731
    moved = apply_group(zero, GroupElement(0.0, 0.0, 1.0, 2.0, 1.0))
    S = np.array([0.5, 3.0])
    assert moved(S, 0.2) == pytest.approx(S + 2.0)
    surface = lambda S, t: invariant_u(S, t, ClosedFormParams(0.5), BENCH)  # noqa: E731
    same = apply_group(surface, GroupElement(0.3, -0.2, 0.7, 1.1, 0.0))
    assert np.array_equal(same(S, 0.4), surface(S, 0.4))
    with pytest.raises(OverflowError):
        apply_group(surface, GroupElement(a1=1.0, epsilon=1e4))


def test_invariant_examples():
    inv1, _ = group_invariants(3.0, 5.0, 1.0, GroupElement(a1=1.0))
    assert inv1 == 5.0
    _, inv2 = group_invariants(1.0, 0.2, 4.5, GroupElement(a1=1.0, a3=7.0))
    assert inv2 == 4.5
    with pytest.raises(DomainError):
        group_invariants(0.0, 0.0, 0.0, GroupElement(a1=1.0))


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0),
       st.floats(-2.0, 2.0))
def test_invariants_constant_along_orbits(a1, a2, a3, a4, eps):
    S, t = np.array([0.2, 1.0, 7.0]), np.array([0.0, 0.4, 0.9])
    u = invariant_u(S, t, ClosedFormParams(0.5), BENCH)
    g = GroupElement(a1, a2, a3, a4, eps)
    before = group_invariants(S, t, u, g)
    after = group_invariants(*group_point(S, t, u, g), g)
    for a, b in zip(before, after):
        assert np.all(np.abs(a - b) <= 1e-10 * (1 + np.abs(a)))


def test_transformed_member_is_a_solution():
    surface = lambda S, t: invariant_u(S, t, ClosedFormParams(8.5), BENCH)  # noqa: E731
    g = GroupElement(0.4, -0.3, 0.8, -1.2, 0.6)
    moved = apply_group(surface, g)
    S, t, _ = group_point(np.array([0.4, 1.3]), np.array([0.2, 0.7]), 0.0, g)
    for s, tt in zip(S, t):
        assert surface_residual_mp(moved, s, tt, BENCH) < 1e-30


# -- asymptotics ---------------------------------------------------------------------


def test_small_S_leading_term():
    params = ClosedFormParams(1.0)
    # t = 0, m = 1: the leading term is -1/rho
    assert asymptotic_small_S(1e-14, 0.0, params, BENCH) == pytest.approx(-10.0, rel=1e-10)
    t = 0.7
    leading = -(2.5 ** (4 / 3)) * math.exp(BENCH.sigma**2 * t / 8) / BENCH.rho
    assert invariant_u(1e-14, t, ClosedFormParams(2.5), BENCH) == pytest.approx(leading, rel=1e-9)


def test_large_S_main_term_is_shared_by_members():
    ratios = []
    for S in (1e4, 1e6, 1e9, 1e14):
        a = invariant_u(S, 0.3, ClosedFormParams(1.0), BENCH)
        b = invariant_u(S, 0.3, ClosedFormParams(10.0), BENCH)
        assert a / (3 * S * math.log(S) / BENCH.rho) == pytest.approx(1.0, rel=6.0 / math.log(S))
        ratios.append(a / b)
    gaps = np.abs(np.array(ratios) - 1.0)
    assert np.all(np.diff(gaps) < 0)


@pytest.mark.parametrize("m", [0.5, -3.0])
def test_expansions_are_accurate_where_they_apply(m):
    params = ClosedFormParams(m, 0.2, 1.0)
    small = np.array([1e-4, 1e-3])
    large = np.array([1e4, 1e5])
    u_small = invariant_u(small, 0.4, params, BENCH)
    u_large = invariant_u(large, 0.4, params, BENCH)
    assert np.all(np.abs(asymptotic_small_S(small, 0.4, params, BENCH) - u_small) < 1e-4 * np.abs(u_small))
    assert np.all(np.abs(asymptotic_large_S(large, 0.4, params, BENCH) - u_large) < 1e-6 * np.abs(u_large))
    with pytest.raises(DegenerateFamily):
        asymptotic_small_S(1e-3, 0.0, ClosedFormParams(0.0), BENCH)


def test_small_S_remainder_order():
    params = ClosedFormParams(0.5)
    S = 1e-2 * 0.5 ** np.arange(0, 11)
    with mpmath.workdps(50):
        scaled = [float(abs(invariant_u(mpmath.mpf(s), mpmath.mpf(0.4), params, BENCH)
                            - asymptotic_small_S(mpmath.mpf(s), mpmath.mpf(0.4), params, BENCH))
                        / mpmath.mpf(s) ** 2.5) for s in S]
    assert max(scaled[-4:]) <= 2 * max(scaled[:4])


# -- Greeks -----------------------------------------------------------------------------


def test_greeks_of_linear_surface():
    S = np.array([0.5, 2.0, 40.0])
    g = greeks(lambda S, t, market: 1.7 * S + 0 * t, S, 0.3, BENCH)
    assert g["delta"] == pytest.approx(np.full(3, 1.7), rel=1e-9)
    assert np.all(np.abs(g["gamma"]) < 1e-6)
    assert np.all(g["theta"] == 0.0) and np.all(g["vega"] == 0.0)


def test_gamma_of_degenerate_surface():
    S = np.array([0.3, 1.0, 12.0])
    g = greeks(lambda S, t, market: degenerate_surface(S, t, 0.5, 2.0, market.rho), S, 0.0, BENCH)
    assert g["gamma"] == pytest.approx(1.0 / (BENCH.rho * S), rel=1e-6)


def test_fig3_delta_is_monotone():
    S = np.linspace(0.5, 100.0, 200)
    g = greeks(family_surface(ClosedFormParams(8.5)), S, 0.5, MarketParams(0.28, 1.0))
    assert np.all(np.diff(g["delta"]) > 0)


def test_rho_times_greek_does_not_depend_on_rho():
    surface = family_surface(ClosedFormParams(4.9))
    S = np.array([0.5, 5.0, 50.0])
    g1 = greeks(surface, S, 0.4, MarketParams(0.35, 1.0))
    g2 = greeks(surface, S, 0.4, MarketParams(0.35, 0.2))
    for name in ("delta", "gamma", "theta", "vega"):
        assert 0.2 * g2[name] == pytest.approx(g1[name], rel=1e-6, abs=1e-9)
