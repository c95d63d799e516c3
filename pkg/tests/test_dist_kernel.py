import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sci_integrate
from scipy import stats

from robicurve import dist_kernel as dk
from robicurve.exceptions import OracleNonconvergence

GRID = np.geomspace(1e-3, 1e2, 25)


def quad_normal(f, points=()):
    # scipy's QUADPACK as a second, independent oracle
    pts = sorted(p for p in points if abs(p) < 40)
    edges = [-40.0] + pts + [40.0]
    return sum(sci_integrate.quad(lambda u: f(u) * stats.norm.pdf(u), a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
               for a, b in zip(edges[:-1], edges[1:]))


def test_normal_primitives():
    assert dk.Phi(0.0) == pytest.approx(0.5, abs=1e-15)
    assert float(dk.Phi_inv(0.75)) == pytest.approx(0.674, abs=5e-4)
    assert dk.phi(1.0) == pytest.approx(0.2419707, abs=1e-7)
    assert dk.integrate(dk.phi) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_phi_inv_rejects_outside_unit_interval(p):
    with pytest.raises(ValueError):
        dk.Phi_inv(p)


def test_clipped_abs_moment_examples():
    assert dk.clipped_abs_moment(0.0) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
    assert dk.clipped_abs_moment(math.inf) == 0.0
    assert dk.clipped_abs_moment(1.0) == pytest.approx(0.166631, abs=1e-6)
    with pytest.raises(ValueError):
        dk.clipped_abs_moment(-1.0)


def test_clipped_second_moment_examples():
    assert dk.clipped_second_moment(math.inf) == pytest.approx(1.0)
    assert dk.clipped_second_moment(0.0) == 0.0
    assert dk.clipped_second_moment(1.0) == pytest.approx(0.682689, abs=1e-6)


@pytest.mark.parametrize("c", GRID)
def test_one_dim_closed_forms_match_quadrature(c):
    pts = (-c, c)
    exc = dk.integrate(lambda u: np.maximum(np.abs(u) - c, 0) * dk.phi(u), points=pts)
    sec = dk.integrate(lambda u: np.minimum(u * u, c * np.abs(u)) * dk.phi(u), points=pts)
    assert abs(dk.clipped_abs_moment(c) - exc) <= 1e-9
    assert abs(dk.clipped_second_moment(c) - sec) <= 1e-9
    assert abs(dk.clipped_abs_moment(c) - quad_normal(lambda u: max(abs(u) - c, 0), pts)) <= 1e-9
    assert abs(dk.truncated_square_moment(c) - quad_normal(lambda u: min(u * u, c * c), pts)) <= 1e-9


@pytest.mark.parametrize("c", [0.01, 0.3, 1.0, 2.5, 7.0])
def test_square_excess_matches_quadrature(c):
    s = math.sqrt(c)
    assert dk.square_upper_excess(c) == pytest.approx(quad_normal(lambda u: max(u * u - c, 0), (-s, s)), abs=1e-10)
    assert dk.square_lower_excess(c) == pytest.approx(quad_normal(lambda u: max(c - u * u, 0), (-s, s)), abs=1e-10)


def test_chi_moments():
    one = dk.chi_clipped_moments(1, 1.0)
    assert one.excess == pytest.approx(0.166631, abs=1e-6)
    assert one.clipped_second == pytest.approx(0.682689, abs=1e-6)
    for k in (1, 2, 4, 9):
        assert tuple(dk.chi_clipped_moments(k, math.inf)) == (0.0, float(k))
    e3 = dk.chi_clipped_moments(3, 0.0)
    assert e3.excess == pytest.approx(2 * math.sqrt(2 / math.pi), abs=1e-12)
    assert e3.clipped_second == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("c", [0.05, 0.5, 1.0, 3.0, 20.0])
def test_chi_reduces_to_one_dim(c):
    m = dk.chi_clipped_moments(1, c)
    assert m.excess == pytest.approx(float(dk.clipped_abs_moment(c)), abs=1e-12)
    assert m.clipped_second == pytest.approx(float(dk.clipped_second_moment(c)), abs=1e-12)


@pytest.mark.parametrize("k", [2, 3, 5, 10])
@pytest.mark.parametrize("c", [0.01, 0.7, 2.0, 6.0])
def test_chi_moments_match_quadrature(k, c):
    f = lambda x: stats.chi.pdf(x, k)
    exc = sci_integrate.quad(lambda x: max(x - c, 0) * f(x), 0, 60, points=[c], limit=200)[0]
    sec = sci_integrate.quad(lambda x: min(x * x, c * x) * f(x), 0, 60, points=[c], limit=200)[0]
    m = dk.chi_clipped_moments(k, c)
    assert m.excess == pytest.approx(exc, abs=1e-9)
    assert m.clipped_second == pytest.approx(sec, abs=1e-9)


def test_scale_moments():
    m = dk.scale_clipped_moments(1.0, math.inf)
    assert m.clipped_mean == pytest.approx(0.0, abs=1e-15)
    assert dk.square_upper_excess(1.0) == pytest.approx(2 * dk.phi(1.0), abs=1e-12)
    assert dk.scale_clipped_moments(1.0, math.inf, g=1.0).upper_excess == 0.0


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.3])
@pytest.mark.parametrize("c", [0.1, 0.5, 1.5])
def test_scale_moments_match_quadrature(alpha, c):
    a2 = alpha * alpha
    m = dk.scale_clipped_moments(alpha, c)
    kinks = [s * math.sqrt(t) for t in (a2 - c, a2, a2 + c) if t > 0 for s in (-1, 1)]
    clip = lambda u: min(max(u * u - a2, -c), c)
    assert m.clipped_mean == pytest.approx(quad_normal(clip, kinks), abs=1e-10)
    assert m.clipped_second == pytest.approx(quad_normal(lambda u: clip(u) * (u * u - a2), kinks), abs=1e-10)
    assert m.clipped_square == pytest.approx(quad_normal(lambda u: clip(u) ** 2, kinks), abs=1e-10)
    assert m.excess_abs == pytest.approx(quad_normal(lambda u: max(abs(u * u - a2) - c, 0), kinks), abs=1e-10)


def test_integrate_examples():
    assert dk.integrate(lambda u: u * u * dk.phi(u)) == pytest.approx(1.0, abs=1e-10)
    val = dk.integrate(lambda u: np.maximum(np.abs(u) - 1, 0) * dk.phi(u), points=(-1, 1))
    assert val == pytest.approx(float(dk.clipped_abs_moment(1.0)), abs=1e-12)
    finite = dk.integrate(lambda x: x * x, dk.QuadratureSpec(domain=(0.0, 3.0)))
    assert finite == pytest.approx(9.0, abs=1e-12)


def test_integrate_signals_nonconvergence():
    spec = dk.QuadratureSpec(max_subdivisions=3)
    with pytest.raises(OracleNonconvergence):
        dk.integrate(lambda u: np.sin(50 * u) ** 2 * np.exp(-np.abs(u)), spec)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        dk.QuadratureSpec(abs_tol=0.0)
    with pytest.raises(ValueError):
        dk.QuadratureSpec(domain=(1.0, 0.0))


def test_monotonicity_on_grid():
    c = np.geomspace(1e-3, 20, 40)  # beyond ~35 the excess underflows to zero
    a = dk.clipped_abs_moment(c)
    s = dk.clipped_second_moment(c)
    assert np.all(np.diff(a) < 0)
    assert np.all(np.diff(s[c < 8]) > 0) and s[-1] <= 1.0  # erf saturates in double precision
    lin = np.linspace(0, 5, 201)
    assert np.all(np.diff(dk.clipped_abs_moment(lin), 2) >= -1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(-30, 30))
def test_gauss_excess_put_call_parity(t):
    # E(U - t)_+ - E(t - U)_+ = -t
    assert dk.gauss_excess(t) - dk.gauss_excess(-t) == pytest.approx(-t, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 50))
def test_square_excess_parity(t):
    # E(V - t)_+ - E(t - V)_+ = 1 - t for V ~ chi^2_1
    assert dk.square_upper_excess(t) - dk.square_lower_excess(t) == pytest.approx(1 - t, abs=1e-12)
