import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbfp.errors import Divergent, IllConditioned, PoleHit
from sbfp.transform import (GammaKind, LstParams, RationalFn, TransformContext,
                            d_du_psi_rational, delta0_lst, delta_lst, gamma_fn,
                            lc_inverse_numeric, lc_inverse_rational, phi_nu, phi_transform,
                            psi_components, psi_rational, psi_transform, restricted_moments)
from sbfp.transform.functional import a_prev_curve, fd_moment, phi_rational
from sbfp.transform.lst import _psi_parts, psi_factored, psi_gamma_form
from sbfp.transform.numeric import digits_for, lc_inverse_adaptive, stehfest_weights
from sbfp.transform.rational import (MERGE_TOL, ExpPoly, lc_inverse_expsum,
                                     lc_inverse_factored, merge_poles, partial_fractions)

UNIT = LstParams(1.0, 1.0, 0.0, 0.0, 1.0, 1.4, 1.4)
PARAM_SETS = [
    UNIT,
    LstParams(1.0, 1.0, 1.0, 0.0, 1.0, 1.4, 1.4),
    LstParams(2.0, 0.5, 0.5, 0.3, 0.5, 0.8, 0.2),
    LstParams(0.5, 1.0, 0.3, 0.0, 2.0, 1.0, 1.0),
    LstParams(1.0, 2.0, 0.2, -0.5, 0.5, 0.2, 0.7),
]
# high-precision Gaver-Stehfest settings for cross-method checks
GS_ORDER, GS_DPS = 36, 60


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# -- delta / gamma ------------------------------------------------------------

def test_delta_values():
    assert delta_lst(0.0, 1.0) == 1.0
    assert delta_lst(0.5, 2.0) == 0.5
    assert delta0_lst(123.0, 0.0) == 1.0


def test_delta_shape_on_grid():
    theta = np.linspace(0, 50, 200)
    d = delta_lst(theta, 1.7)
    assert d[0] == 1.0 and np.all(np.diff(d) < 0) and np.all((d > 0) & (d <= 1))


@pytest.mark.parametrize("kind", list(GammaKind))
def test_gamma_reduces_to_delta(kind):
    p = LstParams(1.3, 0.7, 0.9, 2.0, -0.4, 1.1, 0.6)
    dm = p.delta0_mean if kind is GammaKind.INITIAL else p.delta_mean
    for theta in np.linspace(0, 20, 50):
        assert abs(gamma_fn(kind, 0.0, theta, p) - delta_lst(theta, dm)) <= 1e-14


def test_gamma_instantiations():
    exit_p = LstParams(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    assert gamma_fn(GammaKind.EXIT, 1.0, 0.0, exit_p) == pytest.approx(0.4, abs=1e-15)
    avg_p = LstParams(1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    assert gamma_fn(GammaKind.AVERAGE, 2.0, 1.0, avg_p) == pytest.approx(0.25, abs=1e-15)


def test_gamma_pole():
    p = LstParams(1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(PoleHit):
        gamma_fn(GammaKind.AVERAGE, 0.0, -1.0, p)


# -- psi ----------------------------------------------------------------------

def test_psi_worked_value():
    c = psi_components(1.0, 0.0, UNIT)
    assert (c.g0, c.g1, c.d, c.d0, c.d2) == (0.5, 0.5, 1.0, 1.0, 1.0)
    assert psi_transform(1.0, 0.0, UNIT) == pytest.approx(7 / 12, rel=1e-15)
    assert psi_rational(0.0, UNIT)(1.0) == pytest.approx(7 / 12, rel=1e-14)


def test_psi_components_at_origin():
    p = PARAM_SETS[2]
    for x in (0.1, 1.0, 7.0):
        c = psi_components(x, 0.0, p)
        assert c.d == p.delta_mean * x and c.d0 == p.delta0_mean * x and c.d2 == p.delta_mean * x


def test_psi_limits():
    assert abs(psi_transform(1e8, 0.0, UNIT) - 1.0) < 1e-7
    assert abs(psi_transform(1e-12, 0.0, UNIT)) < 1e-11


def test_psi_domain():
    with pytest.raises(ValueError):
        psi_transform(0.0, 0.0, UNIT)
    with pytest.raises(ValueError):
        psi_transform(1.0, -0.1, UNIT)


def test_psi_forms_agree_random_points():
    rng = np.random.default_rng(12)
    for _ in range(100):
        p = LstParams(rng.uniform(0.2, 3), rng.uniform(0.2, 3), rng.uniform(0, 2),
                      rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2))
        u, x = rng.uniform(0, 2), rng.uniform(0.01, 100)
        assert rel(psi_gamma_form(x, u, p), psi_factored(x, u, p)) <= 1e-12


def poles_were_merged(u, p):
    """True when building ``psi_rational`` merged distinct but close poles."""
    parts = _psi_parts(u, p)
    if any(m > 1 for part in parts for _, m in part.poles):
        return True
    roots = [r for part in parts for r, _ in part.poles]
    return any(0 < abs(a - b) <= MERGE_TOL * max(1.0, abs(a), abs(b)) for a in roots for b in roots)


@settings(max_examples=200, deadline=None)
@given(dm=st.floats(0.1, 5), d0=st.floats(0.1, 5), sigma=st.floats(0, 2), a0=st.floats(0, 2),
       wb=st.floats(0, 2), wp=st.floats(0, 2), we=st.floats(-2, 2),
       u=st.floats(0, 2), x=st.floats(0.01, 100))
def test_psi_forms_and_rational_agree(dm, d0, sigma, a0, wb, wp, we, u, x):
    p = LstParams(dm, d0, sigma, a0, wb, wp, we)
    ref = psi_factored(x, u, p)
    assert rel(psi_gamma_form(x, u, p), ref) <= 1e-12
    g = psi_rational(u, p)
    # merging near-coincident poles moves a root by up to 1e-8 relative
    assert rel(g(x), ref) <= (1e-6 if poles_were_merged(u, p) else 1e-10)


def test_psi_rational_structure():
    p = PARAM_SETS[2]
    g = psi_rational(0.3, p)
    assert g.proper and g.denominator[-1] == 1.0
    roots = np.array([r for r, _ in g.roots()])
    shift = 0.5 * p.sigma**2 * 0.09 + p.w_bar * 0.3
    assert np.min(np.abs(roots - (-0.5 / p.delta_mean - shift))) < 1e-12
    roots0 = np.array([r for r, _ in psi_rational(0.0, p).roots()])
    assert np.min(np.abs(roots0 + 0.5 / p.delta_mean)) < 1e-12
    # the same root recovered from the coefficients alone
    bare = RationalFn(g.numerator, g.denominator)
    found = np.array([complex(r) for r, _ in bare.roots()])
    assert np.min(np.abs(found - (-0.5 / p.delta_mean - shift))) < 1e-9


def test_psi_without_initial_delay():
    p = LstParams(1.0, 0.0, 0.4, 0.0, 1.0, 1.2, 1.2)
    for x in (0.1, 1.0, 10.0):
        assert rel(psi_rational(0.2, p)(x), psi_factored(x, 0.2, p)) <= 1e-12
    # with no initial delay the large-x limit is 1/4, not 1
    assert abs(psi_factored(1e9, 0.0, p) - 0.25) < 1e-8


@pytest.mark.parametrize("p", PARAM_SETS)
def test_d_du_psi_matches_fd(p):
    g = d_du_psi_rational(p)
    step = 1e-5
    for x in (0.37, 1.9, 8.2):
        fd = -(psi_transform(x, step, p) - psi_transform(x, 0.0, p)) / step
        central = -(psi_factored(x, step, p) - psi_factored(x, -step, p)) / (2 * step)
        assert rel(g(x), central) <= 1e-6
        assert abs(g(x) - fd) <= 1e-4 * max(1.0, abs(fd))


def test_d_du_psi_without_delay():
    p = LstParams(1.0, 0.0, 0.4, 0.0, 1.0, 1.2, 1.2)
    step = 1e-5
    x = 0.8
    central = -(psi_factored(x, step, p) - psi_factored(x, -step, p)) / (2 * step)
    assert rel(d_du_psi_rational(p)(x), central) <= 1e-6


# -- rational machinery -------------------------------------------------------

def test_rational_normalization_and_pole_guard():
    g = RationalFn([2.0], [4.0, 2.0])
    assert g.denominator[-1] == 1.0 and g(0.0) == 0.5
    with pytest.raises(PoleHit):
        g(-2.0)
    with pytest.raises(ValueError):
        RationalFn([1.0], [0.0])


def test_merge_poles():
    merged = merge_poles([(-1.0, 1), (-1.0 + 1e-10, 1), (-2.0, 1)])
    assert sorted((round(r.real, 6), m) for r, m in merged) == [(-2.0, 1), (-1.0, 2)]


def test_partial_fractions_reconstruct():
    poles = [(-1.0, 2), (-3.0, 1)]
    num = [2.0, -1.0, 0.5]
    terms = partial_fractions(num, poles)
    x = 0.7
    direct = np.polyval(num[::-1], x) / ((x + 1) ** 2 * (x + 3))
    total = sum(c / (x - r) ** (j + 1) for r, coeffs in terms for j, c in enumerate(coeffs))
    assert abs(total - direct) < 1e-13


@pytest.mark.parametrize("g,h,expected", [
    (RationalFn([0.0, 1.0], [1.0, 1.0]), 1.0, math.exp(-1.0)),
    (RationalFn([1.0], [1.0, 1.0]), 2.0, 1.0 - math.exp(-2.0)),
    (RationalFn.constant(1.0), 3.7, 1.0),
    (RationalFn([0.0, 1.0], [10.0, 1.0]), 0.1, math.exp(-1.0)),
])
def test_lc_inverse_known_pairs(g, h, expected):
    assert lc_inverse_rational(g, h) == pytest.approx(expected, rel=1e-13)
    got = lc_inverse_numeric(g, h, order=GS_ORDER, precision=GS_DPS)
    assert got == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize("a,h", [(1.0, 1.0), (10.0, 0.1)])
def test_stehfest_default_order(a, h):
    # double precision, order 14
    g = RationalFn([0.0, 1.0], [a, 1.0])
    assert abs(lc_inverse_numeric(g, h) - math.exp(-1.0)) <= 1e-6


def test_lc_inverse_repeated_and_complex_poles():
    # x/(x+1)^2  <->  h e^{-h}
    g = RationalFn([0.0, 1.0], [1.0, 2.0, 1.0])
    assert lc_inverse_rational(g, 1.5) == pytest.approx(1.5 * math.exp(-1.5), rel=1e-12)
    # x/((x+1)^2+4)  <->  e^{-h} sin(2h)/2
    g = RationalFn([0.0, 1.0], [5.0, 2.0, 1.0])
    assert lc_inverse_rational(g, 0.8) == pytest.approx(math.exp(-0.8) * math.sin(1.6) / 2, rel=1e-12)


def test_ill_conditioned_cluster():
    # eigenvalue-derived poles 1e-6 apart are neither merged nor trusted
    g = RationalFn([1.0], list(np.polynomial.polynomial.polyfromroots([-1.0, -1.0 - 1e-6])))
    with pytest.raises(IllConditioned):
        lc_inverse_rational(g, 1.0)
    # the divided-difference evaluator handles the same pair when poles are given exactly
    val = lc_inverse_factored(1.0, [1.0], [(-1.0, 1), (-1.0 - 1e-6, 1)], 1.0)
    ref = float(mpmath.invertlaplace(lambda s: 1 / (s * (s + 1) * (s + 1 + mpmath.mpf("1e-6"))),
                                     1.0, method="talbot"))
    assert val == pytest.approx(ref, rel=1e-8)


def test_expsum_derivative():
    curve = lc_inverse_expsum(RationalFn([0.0, 1.0], [1.0, 2.0, 1.0]))
    d = curve.derivative()
    for h in (0.3, 2.0):
        assert d(h) == pytest.approx((1 - h) * math.exp(-h), rel=1e-12)


# -- Gaver-Stehfest -----------------------------------------------------------

def test_stehfest_weights_sum_to_zero():
    for n in (2, 8, 14, 30):
        w = stehfest_weights(n)
        assert sum(w) == 0 and all(isinstance(v, Fraction) for v in w)
    with pytest.raises(ValueError):
        stehfest_weights(7)


def test_gs_divergence_detected():
    # a pure oscillation is beyond Gaver-Stehfest
    g = RationalFn([0.0, 0.0, 1.0], [400.0, 0.0, 1.0])
    with pytest.raises(Divergent):
        lc_inverse_numeric(g, 3.0, order=14)


def forward_lc(a):
    """Laplace-Carson transform of exp(-a h) by numerical quadrature."""
    def g(x):
        return x * mpmath.quad(lambda t: mpmath.exp(-(a + x) * t), [0, mpmath.inf])
    return g


def order_for(decay):
    """Stehfest order that resolves exp(-decay) to well below 1e-5 relative."""
    return 40 if decay <= 12 else 80 if decay <= 25 else 128 if decay <= 50 else 320


ROUND_TRIP_H = [float(h) for h in np.geomspace(0.1, 10.0, 7)]


@pytest.mark.parametrize("a", [0.5, 1.0, 10.0])
@pytest.mark.parametrize("h", ROUND_TRIP_H)
def test_round_trip_exponential_quadrature(a, h):
    order = order_for(a * h)
    dps = digits_for(order)
    with mpmath.workdps(dps):
        got = lc_inverse_numeric(forward_lc(a), h, order=order, precision=dps)
    assert rel(got, math.exp(-a * h)) <= 1e-5


@pytest.mark.parametrize("a", [0.5, 1.0, 10.0])
def test_round_trip_exponential_adaptive(a):
    for h in ROUND_TRIP_H:
        got = lc_inverse_adaptive(lambda x: x / (x + a), h)
        assert rel(got, math.exp(-a * h)) <= 1e-5


def test_adaptive_gives_up():
    with pytest.raises(Divergent):
        lc_inverse_adaptive(lambda x: x * x / (x * x + 400.0), 3.0, orders=(16, 24, 32))


@pytest.mark.parametrize("p", PARAM_SETS)
@pytest.mark.parametrize("h", [0.5, 1.0, 2.0, 5.0])
def test_psi_rational_vs_stehfest(p, h):
    g = psi_rational(0.0, p)
    exact = lc_inverse_rational(g, h)
    assert rel(lc_inverse_numeric(g, h, order=GS_ORDER, precision=GS_DPS), exact) <= 1e-6


@pytest.mark.parametrize("h", [0.5, 1.0])
def test_default_order_accuracy_moderate_h(h):
    g = psi_rational(0.0, UNIT)
    assert rel(lc_inverse_numeric(g, h), lc_inverse_rational(g, h)) <= 2e-6


# -- the functional -----------------------------------------------------------

@pytest.mark.parametrize("p", PARAM_SETS)
def test_value_theorems(p):
    assert abs(phi_nu(TransformContext(h=1e-4 * p.delta_mean), p) - 1.0) <= 1e-3
    assert abs(phi_nu(TransformContext(h=50 * p.delta_mean), p)) <= 1e-3


def test_route_equivalence_eq_origin():
    p = LstParams(1.0, 1.0, 1.0, 0.0, 1.0, 1.4, 3.3)
    ctx = TransformContext(u=0.5, h=1.0)
    ref = lc_inverse_rational(psi_rational(0.5, p), 1.0)
    assert rel(phi_nu(ctx, p), ref) <= 1e-12
    assert rel(phi_nu(ctx, p, method="partial"), ref) <= 1e-12


@pytest.mark.parametrize("ctx", [
    TransformContext(u=0.3, v=0.2, vartheta=0.1, theta=0.4, h=0.7),
    TransformContext(u=0.0, v=0.5, vartheta=0.0, theta=0.05, h=2.5),
    TransformContext(u=1.2, v=0.0, vartheta=0.3, theta=0.0, h=4.0),
])
@pytest.mark.parametrize("p", PARAM_SETS[1:4])
def test_functional_assembly_consistent(ctx, p):
    exact = phi_nu(ctx, p)
    assert rel(phi_nu(ctx, p, method="partial"), exact) <= 1e-9
    for x in (0.2, 3.0):
        assert rel(phi_rational(ctx, p)(x), phi_transform(x, ctx, p)) <= 1e-11
    g = lambda x: phi_transform(x, ctx, p)  # noqa: E731
    assert rel(lc_inverse_numeric(g, ctx.h, order=GS_ORDER, precision=GS_DPS), exact) <= 1e-6


def test_context_validation():
    with pytest.raises(ValueError):
        phi_nu(TransformContext(u=-1.0), UNIT)
    with pytest.raises(ValueError):
        phi_nu(TransformContext(h=-1.0), UNIT)


@pytest.mark.parametrize("p", PARAM_SETS[:3])
@pytest.mark.parametrize("h", [0.5, 1.0, 2.0])
def test_a_prev_exact_vs_fd(p, h):
    m = restricted_moments(p, h)
    assert rel(m.a_prev, m.a_prev_fd) <= 1e-5
    assert m.a_prev == pytest.approx(a_prev_curve(p)(h), rel=1e-12)
    assert m.nu == abs(m.tau_exit) / p.delta_mean


def test_unused_variable_derivative_is_zero():
    # without volatility or initial drift the u-derivative vanishes when all slopes are 0
    p = LstParams(1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    assert abs(restricted_moments(p, 1.0).a_prev) < 1e-15
    assert abs(fd_moment(p, 1.0, "u")) < 1e-9


def test_moment_of_exit_time_by_quadrature():
    # E[tau_nu; h] is -d/dtheta of the functional: cross-check the FD route
    # against GS inversion of a finite-difference transform in high precision.
    p = PARAM_SETS[1]
    h = 1.0
    step = mpmath.mpf("1e-20")
    with mpmath.workdps(GS_DPS):
        def g(x):
            hi = phi_transform(x, TransformContext(theta=step), p)
            lo = phi_transform(x, TransformContext(theta=0.0), p)
            return -(hi - lo) / step
        ref = lc_inverse_numeric(g, h, order=GS_ORDER, precision=GS_DPS)
    assert rel(fd_moment(p, h, "theta"), ref) <= 1e-6
