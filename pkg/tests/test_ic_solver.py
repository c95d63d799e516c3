import math

import numpy as np
import pytest
from scipy import special

from robicurve.dist_kernel import Phi_inv, clipped_abs_moment, gauss_expect, phi
from robicurve.ic_solver import (
    NeighborhoodSpec,
    nonadaptivity_ratio,
    scale_c_crossover_radius,
    solve,
    solve_huber,
    solve_location,
    solve_regression_c1,
    solve_regression_intercept,
    solve_regression_scale,
    solve_scale_c,
    solve_scale_v,
)
from robicurve.models import Location, RegressorDist, Scale

R_GRID = [0.05, 0.2, 0.5, 1.0, 2.0, 5.0]


def design_expect(K, f):
    """``E f(x, u)`` by exact summation over atoms and quadrature in ``u``."""
    rule = K.rule(prefer_atoms=True)
    total = 0.0
    for x, w in zip(rule.X, rule.weights):
        total += w * gauss_expect(lambda u: f(np.broadcast_to(x, (np.size(u), len(x))), np.atleast_1d(u)))
    return total


# -- Huber ------------------------------------------------------------------------


def test_huber_examples():
    assert math.isinf(solve_huber(0.0).m)
    assert np.array_equal(solve_huber(0.0)(np.array([-5.0, 7.0])), [-5.0, 7.0])
    one = solve_huber(1.0)
    assert np.array_equal(one(np.array([-2.0, 0.5])), [-1.0, 1.0])
    psi = solve_huber(0.05)
    assert psi.m == pytest.approx(1.399, abs=1e-3)
    assert abs(psi.residual) < 1e-10


@pytest.mark.parametrize("s", [0.01, 0.1, 0.3, 0.7, 0.95])
def test_huber_equation_residual(s):
    psi = solve_huber(s)
    excess = gauss_expect(lambda u: np.maximum(np.abs(u) - psi.m, 0), points=(-psi.m, psi.m))
    assert s / (1 - s) * psi.m == pytest.approx(excess, abs=1e-10)


def test_huber_rejects_bad_fraction():
    with pytest.raises(ValueError):
        solve_huber(1.2)


# -- location ---------------------------------------------------------------------


def test_location_examples():
    inf = solve_location(1, math.inf)
    assert inf.bias == pytest.approx(math.sqrt(math.pi / 2), abs=1e-12)
    zero = solve_location(1, 0.0)
    assert zero.A == 1.0 and math.isinf(zero.clip_upper)
    half = solve_location(1, 0.5)
    assert half.clip_upper == pytest.approx(0.860, abs=2e-3)
    assert half.max_residual < 1e-10


@pytest.mark.parametrize("r", R_GRID)
def test_location_fisher_consistency_by_quadrature(r):
    ic = solve_location(1, r)
    c = ic.clip_upper
    assert gauss_expect(ic) == pytest.approx(0.0, abs=1e-12)
    assert gauss_expect(lambda u: ic(u) * u, points=(-c, c)) == pytest.approx(1.0, abs=1e-8)
    # bias equation against an independent oracle
    excess = gauss_expect(lambda u: np.maximum(np.abs(u) - c, 0), points=(-c, c))
    assert r * r * c == pytest.approx(excess, abs=1e-10)


@pytest.mark.parametrize("k", [2, 3, 7])
def test_location_k_dim_residuals(k):
    ic = solve_location(k, 0.5)
    assert ic.max_residual < 1e-10
    b = solve_location(k, math.inf).bias
    assert b == pytest.approx(k * special.gamma(k / 2) / (math.sqrt(2) * special.gamma((k + 1) / 2)), rel=1e-12)


def test_location_monotone_in_radius():
    ics = [solve_location(1, r) for r in R_GRID]
    c = [ic.clip_upper for ic in ics]
    bias = [ic.bias for ic in ics]
    var = [ic.variance for ic in ics]
    assert all(np.diff(c) < 0) and all(np.diff(bias) < 0) and all(np.diff(var) > 0)
    assert bias[-1] > solve_location(1, math.inf).bias


def test_location_large_radius_limit():
    big, lim = solve_location(1, 1e3), solve_location(1, math.inf)
    assert big.bias == pytest.approx(lim.bias, rel=1e-3)
    assert big.variance == pytest.approx(lim.variance, rel=1e-3)


def test_location_high_dimension_limit():
    ic = solve_location(200, math.inf)
    assert ic.bias / math.sqrt(200) == pytest.approx(1.0, rel=0.01)
    assert ic.variance / 200 == pytest.approx(1.0, rel=0.01)


# -- scale ------------------------------------------------------------------------


def test_scale_c_examples():
    inf = solve_scale_c(math.inf)
    assert inf.extras["alpha"] == pytest.approx(0.674, abs=1e-3)
    assert inf.bias == pytest.approx(1.166, abs=1e-3)
    zero = solve_scale_c(0.0)
    u = np.linspace(-3, 3, 13)
    assert np.allclose(zero(u), (u * u - 1) / 2) and math.isinf(zero.clip_upper)
    assert scale_c_crossover_radius() == pytest.approx(0.92, abs=5e-3)


@pytest.mark.parametrize("r", [0.1, 0.5, 0.9, 0.95, 1.5, 4.0])
def test_scale_c_by_quadrature(r):
    ic = solve_scale_c(r)
    a2, c, A = ic.extras["alpha"] ** 2, ic.extras["c"], ic.A
    kinks = [s * math.sqrt(t) for t in (a2 - c, a2, a2 + c) if t > 0 for s in (-1, 1)]
    assert ic.max_residual < 1e-10
    assert gauss_expect(ic, points=kinks) == pytest.approx(0.0, abs=1e-8)
    assert gauss_expect(lambda u: ic(u) * (u * u - 1), points=kinks) == pytest.approx(1.0, abs=1e-8)
    excess = gauss_expect(lambda u: np.maximum(np.abs(u * u - a2) - c, 0), points=kinks)
    assert r * r * c == pytest.approx(excess, abs=1e-10)
    assert ic.bias == pytest.approx(A * c)


def test_scale_c_alpha_decreasing_and_continuous():
    rs = np.linspace(0.05, 3.0, 40)
    alphas = np.array([solve_scale_c(r).extras["alpha"] for r in rs])
    assert np.all(np.diff(alphas) < 0)
    assert alphas[-1] > float(Phi_inv(0.75))
    rc = scale_c_crossover_radius()
    left, right = solve_scale_c(rc - 1e-6), solve_scale_c(rc + 1e-6)
    assert left.A == pytest.approx(right.A, abs=1e-4)
    assert left.extras["alpha"] == pytest.approx(right.extras["alpha"], abs=1e-4)


def test_scale_v_examples():
    inf = solve_scale_v(math.inf)
    assert inf.bias == pytest.approx(2.066, abs=1e-3)
    assert inf.bias == pytest.approx(math.sqrt(math.pi * math.e / 2), abs=1e-12)
    assert 1 / gauss_expect(lambda u: np.maximum(u * u - 1, 0), points=(-1, 1)) == pytest.approx(2.0664, abs=1e-4)
    assert 2 * float(phi(1.0)) == pytest.approx(0.48394, abs=1e-5)
    zero = solve_scale_v(0.0)
    assert math.isinf(zero.clip_upper)


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0, 3.0])
def test_scale_v_by_quadrature(r):
    ic = solve_scale_v(r)
    g, c = ic.extras["g"], ic.extras["c"]
    kinks = [s * math.sqrt(t) for t in (g, g + c) for s in (-1, 1)]
    assert ic.max_residual < 1e-10
    assert gauss_expect(ic, points=kinks) == pytest.approx(0.0, abs=1e-8)
    assert gauss_expect(lambda u: ic(u) * (u * u - 1), points=kinks) == pytest.approx(1.0, abs=1e-8)
    assert r * r * c == pytest.approx(gauss_expect(lambda u: np.maximum(g - u * u, 0), points=kinks), abs=1e-10)
    assert ic.bias == pytest.approx(ic.clip_upper - ic.clip_lower)


# -- regression -------------------------------------------------------------------


def test_regression_reduces_to_location():
    K = RegressorDist.point_mass([1.0])
    for r in R_GRID:
        reg, loc = solve_regression_c1(r, K), solve_location(1, r)
        assert reg.A == pytest.approx(loc.A, abs=1e-10)
        assert reg.bias == pytest.approx(loc.bias, abs=1e-10)


def test_regression_min_bias_standard_normal():
    ic = solve_regression_c1(math.inf, RegressorDist.standard_normal(1))
    assert ic.bias == pytest.approx(math.pi / 2, abs=1e-8)


@pytest.mark.parametrize("r", [0.3, 1.0])
def test_regression_alpha2_matches_location(r):
    ic = solve_regression_c1(r, RegressorDist.standard_normal(1), alpha=2)
    loc = solve_location(1, r)
    assert ic.extras.get("c", ic.clip_upper) == pytest.approx(loc.clip_upper, abs=1e-10)


@pytest.mark.parametrize("K", [RegressorDist.two_point(1.0, -4.0, 0.8), RegressorDist.two_point(0.5, 2.0, 0.3)])
def test_regression_fisher_consistency_by_summation(K):
    ic = solve_regression_c1(0.5, K)
    assert ic.max_residual < 1e-10
    E_eta_lam = design_expect(K, lambda x, u: ic((x, u))[:, 0] * x[:, 0] * u)
    assert E_eta_lam == pytest.approx(1.0, abs=1e-8)
    assert design_expect(K, lambda x, u: ic((x, u))[:, 0]) == pytest.approx(0.0, abs=1e-10)


def test_regression_scale_targets():
    K = RegressorDist.standard_normal(1)
    sigma0 = solve_regression_scale(0.0, K, target="sigma")
    assert sigma0.extras["z"] == pytest.approx(0.0, abs=1e-15)
    theta = solve_regression_scale(0.7, RegressorDist.point_mass([1.0]), target="theta")
    assert theta.bias == pytest.approx(solve_location(1, 0.7).bias, abs=1e-10)
    joint = solve_regression_scale(0.5, K, target="joint")
    assert joint.max_residual < 1e-10
    # slope part decays like 1/u at fixed x
    big = np.array([1e3, 1e4])
    vals = joint((np.ones(2), big))[:, 0]
    assert vals[0] * big[0] == pytest.approx(vals[1] * big[1], rel=1e-3)


def test_intercept_symmetric_design_is_adaptive():
    K = RegressorDist.two_point(1.0, -1.0, 0.5)
    ic = solve_regression_intercept(0.5, K)
    assert abs(ic.center) < 1e-10
    assert nonadaptivity_ratio(0.5, K) == pytest.approx(0.0, abs=1e-8)


def test_intercept_classical_adaptivity():
    K = RegressorDist.two_point(1.0, -4.0, 0.8)
    ic = solve_regression_intercept(0.0, K)
    assert abs(ic.center) < 1e-10
    assert nonadaptivity_ratio(0.0, K) == pytest.approx(0.0, abs=1e-8)


def test_intercept_asymmetric_design():
    K = RegressorDist.two_point(1.0, -4.0, 0.8)
    ic = solve_regression_intercept(1.0, K)
    assert abs(ic.center) > 1e-6
    assert ic.max_residual < 1e-10
    slope = lambda x, u: ic((x, u))[:, 0]
    assert design_expect(K, slope) == pytest.approx(0.0, abs=1e-8)
    assert design_expect(K, lambda x, u: slope(x, u) * x[:, 0] * u) == pytest.approx(1.0, abs=1e-8)
    assert design_expect(K, lambda x, u: slope(x, u) * u) == pytest.approx(0.0, abs=1e-8)


def test_nonadaptivity_grows_with_asymmetry():
    ratios = []
    for p in (0.5, 0.8, 0.95):
        x2 = -p / (1 - p)  # keeps E x = 0 with x1 = 1
        ratios.append(nonadaptivity_ratio(1.0, RegressorDist.two_point(1.0, x2, p)))
    assert ratios[0] == pytest.approx(0.0, abs=1e-8)
    assert 0 < ratios[1] < ratios[2]


# -- dispatch ---------------------------------------------------------------------


def test_dispatch_routes_models():
    assert solve(Location(1), NeighborhoodSpec("c", 0.5)).clip_upper == solve_location(1, 0.5).clip_upper
    assert solve(Scale(), NeighborhoodSpec("v", 0.5)).bias == solve_scale_v(0.5).bias
    with pytest.raises(NotImplementedError):
        solve(Scale(), NeighborhoodSpec("h", 0.1))


def test_neighborhood_validation():
    with pytest.raises(ValueError):
        NeighborhoodSpec("x", 0.1)
    with pytest.raises(ValueError):
        NeighborhoodSpec("c", -1.0)
    with pytest.raises(ValueError):
        NeighborhoodSpec("c", 0.1, alpha=3)


def test_max_mse_formula():
    ic = solve_location(1, 0.5)
    assert ic.max_mse() == pytest.approx(ic.variance + 0.25 * ic.bias**2)
    assert math.isinf(solve_location(1, 0.0).max_mse(0.1))
    assert clipped_abs_moment(ic.clip_upper) == pytest.approx(0.25 * ic.clip_upper, abs=1e-10)
