"""Location models and Huber M-estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._curves import InfluenceCurve, NeighborhoodSpec
from .._roots import find_root
from ..dist_kernel import (
    Phi,
    chi_clipped_moments,
    chi_mean,
    chi_truncated_square,
    clipped_abs_moment,
    clipped_second_moment,
    truncated_square_moment,
)
from ..models import Location, classical_ic


def _radial_weight(u, c):
    u = np.asarray(u, dtype=float)
    norm = np.abs(u) if u.ndim <= 1 else np.linalg.norm(u, axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, c / norm)


def clip_constant(r, k=1):
    """Root ``c`` of ``r^2 c = E(|U| - c)_+`` with ``|U| ~ chi_k``."""
    if r == 0:
        return math.inf
    if math.isinf(r):
        return 0.0
    return find_root(lambda c: r * r * c - chi_clipped_moments(k, c).excess,
                     0.0, chi_mean(k) / (r * r), name="bias equation")


def solve_location(k: int = 1, r: float = 0.5) -> InfluenceCurve:
    """Minimax influence curve ``A u min(1, c/|u|)`` for ``N(theta, I_k)``."""
    if k < 1:
        raise ValueError("dimension must be positive")
    if not r >= 0:
        raise ValueError("radius must be nonnegative")
    model = Location(k)
    nbd = NeighborhoodSpec("c", r)
    if r == 0:
        ic = classical_ic(model)
        ic.nbd = nbd
        return ic
    if math.isinf(r):
        b = k / chi_mean(k)

        def min_bias(u, _b=b):
            u = np.asarray(u, dtype=float)
            norm = np.abs(u) if u.ndim <= 1 else np.linalg.norm(u, axis=-1, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(norm > 0, _b * u / norm, 0.0)

        return InfluenceCurve(model, nbd, A=b, center=0.0, clip_lower=-math.inf,
                              clip_upper=0.0, bias=b, variance=b * b, func=min_bias,
                              extras={"limit": "min_bias"})
    c = clip_constant(r, k)
    mom = chi_clipped_moments(k, c)
    A = k / mom.clipped_second
    residuals = {
        "bias": c - mom.excess / (r * r),
        "fisher": A * mom.clipped_second / k - 1.0,
    }

    def func(u, _A=A, _c=c):
        return _A * np.asarray(u, dtype=float) * _radial_weight(u, _c)

    return InfluenceCurve(model, nbd, A=A, center=0.0, clip_lower=-math.inf, clip_upper=c,
                          bias=A * c, variance=A * A * chi_truncated_square(k, c),
                          func=func, residuals=residuals)


@dataclass(frozen=True)
class HuberPsi:
    """Huber score ``max(-m, min(u, m))``; ``m = 0`` stands for the sign score."""

    s: float
    m: float

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.m == 0:
            return np.sign(u)
        return np.clip(u, -self.m, self.m)

    @property
    def second_moment(self):
        """``E psi(U)^2`` under the ideal model."""
        return 1.0 if self.m == 0 else float(truncated_square_moment(self.m))

    @property
    def slope(self):
        """``E psi'(U)``, with the sign score read distributionally."""
        if self.m == 0:
            return 2.0 / math.sqrt(2.0 * math.pi)
        return float(2.0 * Phi(self.m) - 1.0)

    @property
    def residual(self):
        if self.s in (0.0, 1.0):
            return 0.0
        return self.s / (1.0 - self.s) * self.m - float(clipped_abs_moment(self.m))


def solve_huber(s: float) -> HuberPsi:
    """Minimax M-estimator score for contamination fraction ``s``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("contamination fraction must lie in [0, 1]")
    if s == 0.0:
        return HuberPsi(0.0, math.inf)
    if s == 1.0:
        return HuberPsi(1.0, 0.0)
    return HuberPsi(s, clip_constant(math.sqrt(s / (1.0 - s))))


def location_clipped_moments(c):
    """``(E (|U|-c)_+, E U^2 min(1, c/|U|))`` in one dimension."""
    return float(clipped_abs_moment(c)), float(clipped_second_moment(c))
