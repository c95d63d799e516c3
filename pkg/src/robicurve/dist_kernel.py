"""Standard normal primitives, clipped moments and an adaptive quadrature oracle.

Closed forms are used on every production path.  :func:`integrate` is an
independent adaptive Gauss-Kronrod rule used to cross-check them.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from .exceptions import OracleNonconvergence

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

#: Marker for an unbounded clipping constant or radius.
UNBOUNDED = math.inf


def phi(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / SQRT2PI
    return out[()] if out.ndim == 0 else out


def Phi(x):
    """Standard normal cdf."""
    out = special.ndtr(np.asarray(x, dtype=float))
    return out[()] if np.ndim(out) == 0 else out


def Phi_inv(p):
    """Standard normal quantile; ``p`` must lie strictly inside (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
        raise ValueError("Phi_inv requires 0 < p < 1")
    out = special.ndtri(p)
    return out[()] if out.ndim == 0 else out


def gauss_excess(t):
    """``E (U - t)_+`` for ``U ~ N(0, 1)`` and any real (or infinite) ``t``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(invalid="ignore"):
        out = phi(t) - t * special.ndtr(-t)
    out = np.where(np.isposinf(t), 0.0, out)
    out = np.where(np.isneginf(t), np.inf, out)
    return out[()] if out.ndim == 0 else out


def clipped_abs_moment(c):
    """``E (|U| - c)_+ = 2 (phi(c) - c Phi(-c))`` for ``c >= 0``."""
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("clipping constant must be nonnegative")
    return 2.0 * gauss_excess(c)


def clipped_second_moment(c):
    """``E U^2 min(1, c/|U|) = 2 Phi(c) - 1`` for ``c >= 0``."""
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("clipping constant must be nonnegative")
    out = special.erf(c / SQRT2)
    return out[()] if np.ndim(out) == 0 else out


def truncated_square_moment(c):
    """``E min(U^2, c^2)``."""
    c = np.asarray(c, dtype=float)
    with np.errstate(invalid="ignore"):
        out = special.erf(c / SQRT2) - 2.0 * c * phi(c) + 2.0 * c * c * special.ndtr(-c)
    out = np.where(np.isposinf(c), 1.0, out)
    return out[()] if out.ndim == 0 else out


# -- partial moments of V = U^2 ------------------------------------------------

_SQRT_2PI_INV = 1.0 / SQRT2PI
_FULL = (1.0, 1.0, 3.0)


def _dens(s):
    return math.exp(-0.5 * s * s) * _SQRT_2PI_INV


def _lower(m, s):
    # E U^(2m) 1(|U| <= s)
    if math.isinf(s):
        return _FULL[m]
    m0 = math.erf(s / SQRT2)
    if m == 0:
        return m0
    if m == 1:
        return m0 - 2.0 * s * _dens(s)
    return 3.0 * m0 - 2.0 * (s**3 + 3.0 * s) * _dens(s)


def _upper(m, s):
    # E U^(2m) 1(|U| > s)
    if math.isinf(s):
        return 0.0
    u0 = math.erfc(s / SQRT2)
    if m == 0:
        return u0
    if m == 1:
        return u0 + 2.0 * s * _dens(s)
    return 3.0 * u0 + 2.0 * (s**3 + 3.0 * s) * _dens(s)


def square_partial_moment(m: int, lo: float, hi: float) -> float:
    """``E V^m 1(lo < V <= hi)`` for ``V ~ chi^2_1`` and ``m`` in {0, 1, 2}."""
    lo = max(lo, 0.0)
    if hi <= lo:
        return 0.0
    s_lo, s_hi = math.sqrt(lo), math.sqrt(hi)
    if lo >= 1.0:
        return _upper(m, s_lo) - _upper(m, s_hi)
    return _lower(m, s_hi) - _lower(m, s_lo)


def square_lower_excess(t: float) -> float:
    """``E (t - V)_+`` for ``V ~ chi^2_1``."""
    if t <= 0.0:
        return 0.0
    return t * square_partial_moment(0, 0.0, t) - square_partial_moment(1, 0.0, t)


def square_upper_excess(t: float) -> float:
    """``E (V - t)_+`` for ``V ~ chi^2_1``."""
    if math.isinf(t):
        return 0.0
    if t <= 0.0:
        return 1.0 - t
    return square_partial_moment(1, t, math.inf) - t * square_partial_moment(0, t, math.inf)


class ScaleMoments(NamedTuple):
    """Moments of ``D = U^2 - alpha^2`` clipped to ``[-c, c]``.

    ``lower_excess`` and ``upper_excess`` refer to the window ``[g, g + c]``
    on the ``U^2`` scale.
    """

    excess_abs: float  # E (|D| - c)_+
    clipped_mean: float  # E clip(D)
    clipped_second: float  # E D clip(D)
    clipped_square: float  # E clip(D)^2
    lower_excess: float  # E (g - U^2)_+
    upper_excess: float  # E (U^2 - g - c)_+


def scale_clipped_moments(alpha: float, c: float, g: float | None = None) -> ScaleMoments:
    a2 = alpha * alpha
    if g is None:
        g = a2
    low_ex = square_lower_excess(g)
    up_ex = square_upper_excess(g + c)
    if math.isinf(c):
        second = 3.0 - 2.0 * a2 + a2 * a2
        return ScaleMoments(0.0, 1.0 - a2, second, second, low_ex, up_ex)
    lo, hi = a2 - c, a2 + c
    p_lo = square_partial_moment(0, 0.0, lo)
    p_hi = square_partial_moment(0, hi, math.inf)
    mid = [square_partial_moment(m, lo, hi) for m in range(3)]
    mid_first = mid[1] - a2 * mid[0]
    mid_sq = mid[2] - 2.0 * a2 * mid[1] + a2 * a2 * mid[0]
    below = square_lower_excess(lo)  # E (lo - V)_+
    above = square_upper_excess(hi)  # E (V - hi)_+
    clipped_mean = -c * p_lo + mid_first + c * p_hi
    # E (a2 - V) 1(V < lo) = below + c p_lo, and symmetrically above
    clipped_second = c * (below + c * p_lo) + mid_sq + c * (above + c * p_hi)
    clipped_square = c * c * (p_lo + p_hi) + mid_sq
    return ScaleMoments(below + above, clipped_mean, clipped_second, clipped_square, low_ex, up_ex)


# -- chi_k radial moments -------------------------------------------------------


class ChiMoments(NamedTuple):
    excess: float  # E (R - c)_+
    clipped_second: float  # E R^2 min(1, c/R)


def chi_mean(k: int) -> float:
    """``E R`` for ``R ~ chi_k``."""
    return SQRT2 * math.exp(special.gammaln((k + 1) / 2.0) - special.gammaln(k / 2.0))


def chi_clipped_moments(k: int, c: float) -> ChiMoments:
    """``E (R - c)_+`` and ``E R^2 min(1, c/R)`` for ``R ~ chi_k``.

    Uses regularized incomplete gamma functions; ``k = 1`` reduces to the
    one-dimensional formulas.
    """
    _check_chi_args(k, c)
    if math.isinf(c):
        return ChiMoments(0.0, float(k))
    if k == 1:
        return ChiMoments(float(clipped_abs_moment(c)), float(clipped_second_moment(c)))
    tail_r, tail_p, body_sq = _chi_pieces(k, c)
    return ChiMoments(float(tail_r - c * tail_p), float(body_sq + c * tail_r))


def chi_truncated_square(k: int, c: float) -> float:
    """``E min(R^2, c^2)`` for ``R ~ chi_k``."""
    _check_chi_args(k, c)
    if math.isinf(c):
        return float(k)
    if k == 1:
        return float(truncated_square_moment(c))
    _, tail_p, body_sq = _chi_pieces(k, c)
    return float(body_sq + c * c * tail_p)


def _check_chi_args(k, c):
    if k < 1:
        raise ValueError("dimension must be positive")
    if c < 0:
        raise ValueError("clipping constant must be nonnegative")


def _chi_pieces(k, c):
    x = 0.5 * c * c
    tail_r = chi_mean(k) * special.gammaincc((k + 1) / 2.0, x)  # E R 1(R > c)
    tail_p = special.gammaincc(k / 2.0, x)  # P(R > c)
    body_sq = k * special.gammainc(k / 2.0 + 1.0, x)  # E R^2 1(R <= c)
    return tail_r, tail_p, body_sq


# -- quadrature rules -----------------------------------------------------------


def gauss_legendre_rule(breaks, n: int = 32):
    """Composite Gauss-Legendre nodes and weights on consecutive ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x).ravel()
    weights = (half * w).ravel()
    return nodes, weights


_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _call(f, x):
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape == x.shape:
            return y
    except (TypeError, ValueError):
        pass
    return np.array([float(f(xi)) for xi in x])


class _Mapped:
    """Integrand after mapping an infinite range onto a finite one."""

    def __init__(self, f, a, b):
        self.f = f
        if math.isinf(a) and math.isinf(b):
            self.to_x = np.arctanh
            self.jac = lambda t: 1.0 / (1.0 - t * t)
            self.from_x = np.tanh
            self.lims = (-1.0, 1.0)
        elif math.isinf(b):
            self.to_x = lambda t: a + np.arctanh(t)
            self.jac = lambda t: 1.0 / (1.0 - t * t)
            self.from_x = lambda x: np.tanh(x - a)
            self.lims = (0.0, 1.0)
        elif math.isinf(a):
            self.to_x = lambda t: b - np.arctanh(t)
            self.jac = lambda t: 1.0 / (1.0 - t * t)
            self.from_x = lambda x: np.tanh(b - x)
            self.lims = (0.0, 1.0)
        else:
            self.to_x = lambda t: t
            self.jac = lambda t: np.ones_like(t)
            self.from_x = lambda x: x
            self.lims = (a, b)

    def __call__(self, t):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            vals = _call(self.f, self.to_x(t)) * self.jac(t)
        return np.where(np.isfinite(vals), vals, 0.0)


def _gk15(g, a, b):
    center, half = 0.5 * (a + b), 0.5 * (b - a)
    y = g(center + half * _NODES)
    kron = half * float(_KW @ y)
    gauss = half * float(_GW @ y)
    return kron, abs(kron - gauss)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and domain for :func:`integrate`."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 200
    domain: tuple = (-math.inf, math.inf)

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")
        lo, hi = self.domain
        if not lo <= hi:
            raise ValueError("domain must be an ordered interval")


def integrate(f, spec: QuadratureSpec | None = None, points=()) -> float:
    """Adaptive Gauss-Kronrod (7/15) quadrature of ``f`` over ``spec.domain``.

    ``f`` should accept a numpy array; scalar callables also work.  Infinite
    endpoints are handled by an ``x = atanh(t)`` substitution and ``points``
    marks kinks or jumps, which are always panel edges.

    Raises
    ------
    OracleNonconvergence
        If more than ``spec.max_subdivisions`` panels are needed.
    """
    spec = spec or QuadratureSpec()
    a, b = spec.domain
    if a == b:
        return 0.0
    g = _Mapped(f, a, b)
    lo, hi = g.lims
    inner = [float(g.from_x(p)) for p in points if a < p < b]
    edges = sorted({lo, hi, *[t for t in inner if lo < t < hi]})
    heap = []
    total = err = 0.0
    for left, right in zip(edges[:-1], edges[1:]):
        val, e = _gk15(g, left, right)
        heapq.heappush(heap, (-e, left, right, val))
        total += val
        err += e
    budget = max(spec.max_subdivisions, len(heap))
    while err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if len(heap) >= budget:
            raise OracleNonconvergence(
                f"quadrature did not converge (estimate {total!r}, error {err:.3g})",
                estimate=total, error=err)
        neg_e, left, right, val = heapq.heappop(heap)
        mid = 0.5 * (left + right)
        if not left < mid < right:
            # panel at floating-point resolution; accept it as is
            heapq.heappush(heap, (0.0, left, right, val))
            err += neg_e
            continue
        v1, e1 = _gk15(g, left, mid)
        v2, e2 = _gk15(g, mid, right)
        heapq.heappush(heap, (-e1, left, mid, v1))
        heapq.heappush(heap, (-e2, mid, right, v2))
        total += v1 + v2 - val
        err += e1 + e2 + neg_e
    return math.fsum(item[3] for item in heap)


def gauss_expect(f, points=(), spec: QuadratureSpec | None = None) -> float:
    """``E f(U)`` for ``U ~ N(0, 1)`` by adaptive quadrature."""
    spec = spec or QuadratureSpec()
    return integrate(lambda u: f(u) * phi(u), spec, points)
