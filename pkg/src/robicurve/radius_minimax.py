"""Least favorable (radius-minimax) design radius over an interval of radii."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._roots import golden_section
from .risk import rel_mse

N_GRID = 64
_R_MIN = 1e-3
_R_MAX = 1e3


@dataclass(frozen=True)
class RadiusMinimaxResult:
    r_lo: float
    r_hi: float
    r_star: float
    inefficiency: float
    inner_sup_argmax: float
    warnings: tuple = field(default=())

    HEADER = "model,kind,r_lo,r_hi,r_star,inefficiency"


def _inner_grid(r_lo, r_hi, n_grid):
    lo = max(r_lo, _R_MIN * min(1.0, r_hi)) if r_lo == 0 else r_lo
    hi = min(r_hi, max(_R_MAX, 10.0 * lo))
    pts = set(np.geomspace(lo, hi, n_grid).tolist()) if hi > lo else {lo}
    pts |= {r_lo, r_hi}
    return sorted(pts)


def _sup(model, kind, alpha, r0, grid):
    vals = [rel_mse(model, kind, r0, r, alpha) for r in grid]
    i = int(np.argmax(vals))
    return vals[i], grid[i], vals


def least_favorable_radius(model, kind: str, r_lo: float, r_hi: float, alpha=1,
                           n_grid: int = N_GRID, tol: float = 1e-6) -> RadiusMinimaxResult:
    """Minimize over ``r0`` the worst relative MSE over ``r`` in ``[r_lo, r_hi]``.

    The outer search is golden-section on ``log r0``.  The inner supremum uses
    both endpoints plus a log grid; a warning is recorded when an interior
    grid point beats both endpoints.
    """
    if not 0 <= r_lo <= r_hi:
        raise ValueError("need 0 <= r_lo <= r_hi")
    if r_lo == r_hi:
        return RadiusMinimaxResult(r_lo, r_hi, r_lo, 0.0, r_lo)
    grid = _inner_grid(r_lo, r_hi, n_grid)

    def worst(log_r0):
        return _sup(model, kind, alpha, math.exp(log_r0), grid)[0]

    lo = math.log(max(r_lo, grid[1] if r_lo == 0 else r_lo))
    hi = math.log(min(r_hi, _R_MAX))
    log_star, _ = golden_section(worst, lo, hi, tol=tol)
    r_star = math.exp(log_star)
    candidates = [(worst(log_star), r_star)]
    if math.isinf(r_hi):
        candidates.append((_sup(model, kind, alpha, math.inf, grid)[0], math.inf))
    value, r_star = min(candidates)
    value, argmax, vals = _sup(model, kind, alpha, r_star, grid)
    warnings = []
    ends = max(vals[0], vals[-1])
    if max(vals[1:-1], default=-math.inf) > ends + 1e-9:
        warnings.append(f"interior maximum of relMSE at r={argmax:.6g}")
    return RadiusMinimaxResult(r_lo, r_hi, r_star, value - 1.0, argmax, tuple(warnings))


def minimax_radius_unknown(model, kind: str, alpha=1, **kw) -> RadiusMinimaxResult:
    """Radius-minimax curve when nothing is known about the radius."""
    return least_favorable_radius(model, kind, 0.0, math.inf, alpha, **kw)
