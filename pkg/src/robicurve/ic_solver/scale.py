"""Scale model ``y = sigma u`` under contamination and total-variation balls."""

from __future__ import annotations

import math

import numpy as np

from .._curves import InfluenceCurve, NeighborhoodSpec
from .._roots import find_root
from ..dist_kernel import (
    Phi,
    Phi_inv,
    phi,
    scale_clipped_moments,
    square_lower_excess,
    square_upper_excess,
)
from ..models import Scale, ShiftedChiSquareLaw, classical_ic

_ALPHA_LO = 0.05


def _classical(nbd):
    ic = classical_ic(Scale())
    ic.nbd = nbd
    ic.extras = {"alpha": 1.0}
    return ic


def _clip_for_alpha(alpha, r):
    # inner equation: r^2 c = E(|U^2 - alpha^2| - c)_+
    hi = scale_clipped_moments(alpha, 0.0).excess_abs / (r * r)
    return find_root(lambda c: r * r * c - scale_clipped_moments(alpha, c).excess_abs,
                     0.0, hi, name="scale bias equation")


def solve_scale_c(r: float = 0.5) -> InfluenceCurve:
    """Minimax scale IC ``A clip(u^2 - alpha^2, -c, c)`` for contamination."""
    if not r >= 0:
        raise ValueError("radius must be nonnegative")
    nbd = NeighborhoodSpec("c", r)
    if r == 0:
        return _classical(nbd)
    model = Scale()
    if math.isinf(r):
        alpha = float(Phi_inv(0.75))
        b = 1.0 / (4.0 * alpha * float(phi(alpha)))

        def mad(u, _a=alpha, _b=b):
            return _b * np.sign(np.abs(np.asarray(u, dtype=float)) - _a)

        return InfluenceCurve(model, nbd, A=b, center=alpha, clip_lower=-b, clip_upper=b,
                              bias=b, variance=b * b, func=mad,
                              extras={"alpha": alpha, "limit": "min_bias", "two_sided": True})

    alpha = find_root(lambda a: scale_clipped_moments(a, _clip_for_alpha(a, r)).clipped_mean,
                      _ALPHA_LO, 1.0, name="scale centering", expand=False)
    c = _clip_for_alpha(alpha, r)
    mom = scale_clipped_moments(alpha, c)
    A = 1.0 / mom.clipped_second
    two_sided = c < alpha * alpha
    residuals = {
        "centering": mom.clipped_mean,
        "fisher": A * mom.clipped_second - 1.0,
        "bias": c - mom.excess_abs / (r * r),
    }

    def func(u, _A=A, _a2=alpha * alpha, _c=c):
        u = np.asarray(u, dtype=float)
        return _A * np.clip(u * u - _a2, -_c, _c)

    return InfluenceCurve(model, nbd, A=A, center=alpha,
                          clip_lower=-c if two_sided else -math.inf, clip_upper=c,
                          bias=A * c, variance=A * A * mom.clipped_square, func=func,
                          residuals=residuals,
                          extras={"alpha": alpha, "c": c, "two_sided": two_sided})


def scale_c_crossover_radius() -> float:
    """Radius at which lower clipping of ``|u|`` starts (``alpha_r^2 = c_r``)."""

    def gap(r):
        ic = solve_scale_c(r)
        return ic.extras["alpha"] ** 2 - ic.extras["c"]

    return find_root(gap, 0.5, 1.5, name="scale crossover", expand=False, xtol=1e-12)


def _v_width(g):
    # centering: E(g - V)_+ = E(V - g - c)_+, decreasing in c
    target = square_lower_excess(g)
    return find_root(lambda c: square_upper_excess(g + c) - target, 0.0, 10.0,
                     name="scale tv centering")


def solve_scale_v(r: float = 0.5) -> InfluenceCurve:
    """Minimax scale IC ``A([g v u^2 ^ (g + c)] - 1)`` for total variation."""
    if not r >= 0:
        raise ValueError("radius must be nonnegative")
    nbd = NeighborhoodSpec("v", r)
    if r == 0:
        return _classical(nbd)
    model = Scale()
    if math.isinf(r):
        omega = 1.0 / (2.0 * float(phi(1.0)))
        p_in = float(2.0 * Phi(1.0) - 1.0)  # P(u^2 < 1)
        lo, hi = -omega * (1.0 - p_in), omega * p_in

        def madv(u, _lo=lo, _hi=hi):
            u = np.asarray(u, dtype=float)
            return np.where(u * u > 1.0, _hi, _lo)

        return InfluenceCurve(model, nbd, A=omega, center=1.0, clip_lower=lo, clip_upper=hi,
                              bias=omega, variance=omega * omega * p_in * (1.0 - p_in),
                              func=madv, extras={"g": 1.0, "c": 0.0, "limit": "min_bias"})

    g = find_root(lambda g: r * r * _v_width(g) - square_lower_excess(g), 1e-10, 1.0,
                  name="scale tv bias equation", expand=False)
    c = _v_width(g)
    law = ShiftedChiSquareLaw()
    lo, hi = g - 1.0, g + c - 1.0
    cross = law.clip_cross(lo, hi)
    A = 1.0 / cross
    residuals = {
        "centering": law.clip_mean(lo, hi),
        "fisher": A * cross - 1.0,
        "bias": c - square_lower_excess(g) / (r * r),
    }

    def func(u, _A=A, _lo=lo, _hi=hi):
        u = np.asarray(u, dtype=float)
        return _A * np.clip(u * u - 1.0, _lo, _hi)

    return InfluenceCurve(model, nbd, A=A, center=g, clip_lower=A * lo, clip_upper=A * hi,
                          bias=A * c, variance=A * A * law.clip_square(lo, hi), func=func,
                          residuals=residuals, extras={"g": g, "c": c})
