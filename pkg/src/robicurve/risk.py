"""Maximal asymptotic risks, relative risks and the Huber correspondence."""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

from ._curves import NeighborhoodSpec
from .ic_solver import solve, solve_huber


def max_mse(ic, r: float) -> float:
    """``E|eta|^2 + r^2 bias^2``; infinite for unbounded curves when ``r > 0``."""
    return ic.max_mse(r)


def max_var_huber(psi, s: float) -> float:
    """Maximal asymptotic variance of the M-estimate ``psi`` over ``s``-contamination."""
    if not 0.0 <= s < 1.0:
        raise ValueError("contamination fraction must lie in [0, 1)")
    if math.isinf(psi.m):
        return 1.0 if s == 0 else math.inf
    bound = 1.0 if psi.m == 0 else psi.m  # sup |psi|; the sign score is bounded by 1
    num = (1.0 - s) * psi.second_moment + s * bound**2
    return num / ((1.0 - s) * psi.slope) ** 2


def coincidence_map(r: float) -> float:
    """Contamination size ``s = r^2 / (1 + r^2)`` matched to radius ``r``."""
    if not r >= 0:
        raise ValueError("radius must be nonnegative")
    if math.isinf(r):
        return 1.0
    return r * r / (1.0 + r * r)


def inverse_coincidence_map(s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise ValueError("contamination fraction must lie in [0, 1]")
    return math.inf if s == 1.0 else math.sqrt(s / (1.0 - s))


def huber_coincidence(r0: float, r: float) -> dict:
    """Both sides of the radius/contamination correspondence for location.

    Returns ``max_mse`` (the shrinking-neighborhood risk of the ``r0`` curve
    at ``r``), ``max_var`` (the Huber risk of the matching ``psi`` at the
    matching ``s``) and ``s``.  The two satisfy ``max_mse = (1 - s) max_var``.
    """
    s0, s = coincidence_map(r0), coincidence_map(r)
    mse = solve(_location_model(), NeighborhoodSpec("c", r0)).max_mse(r)
    var = max_var_huber(solve_huber(s0), s)
    return {"s0": s0, "s": s, "max_mse": mse, "max_var": var}


def _location_model():
    from .models import Location

    return Location(1)


# -- relative risk --------------------------------------------------------------


def _key(model):
    K = model.regressor
    return (model.variant, model.k, id(K) if K is not None else None)


@lru_cache(maxsize=4096)
def _cached_solve(model_ref, kind, r, alpha, target):
    return solve(model_ref.model, NeighborhoodSpec(kind, r, alpha), target=target)


class _Ref:
    # hashable wrapper so models can pass through lru_cache
    def __init__(self, model):
        self.model = model
        self._k = _key(model)

    def __hash__(self):
        return hash(self._k)

    def __eq__(self, other):
        return isinstance(other, _Ref) and self._k == other._k


def solve_cached(model, kind, r, alpha=1, target="joint"):
    """Solver call memoized on ``(model, kind, r, alpha)``."""
    return _cached_solve(_Ref(model), kind, float(r), alpha, target)


def rel_mse(model, kind: str, r0: float, r: float, alpha=1) -> float:
    """``maxMSE(eta_r0, r) / maxMSE(eta_r, r)``; a bias ratio at ``r = inf``."""
    ic0 = solve_cached(model, kind, r0, alpha)
    if math.isinf(r):
        if math.isinf(ic0.bias):
            return math.inf
        return (ic0.bias / solve_cached(model, kind, math.inf, alpha).bias) ** 2
    num = ic0.max_mse(r)
    if math.isinf(num):
        return math.inf
    return num / solve_cached(model, kind, r, alpha).max_mse(r)


def rel_var(s0: float, s: float) -> float:
    """``maxVar(psi_s0, s) / maxVar(psi_s, s)`` for Huber location."""
    return max_var_huber(solve_huber(s0), s) / max_var_huber(solve_huber(s), s)


# -- tables ---------------------------------------------------------------------


@dataclass(frozen=True)
class RiskPoint:
    r0: float
    r: float
    max_mse: float
    rel_mse: float
    error: str = ""

    @property
    def unbounded(self):
        return math.isinf(self.max_mse)


@dataclass
class RiskReport:
    model: object
    kind: str
    alpha: float
    rows: list = field(default_factory=list)

    HEADER = "model,kind,alpha,r0,r,maxmse,relmse"

    def to_csv(self, header=True):
        out = io.StringIO()
        if header:
            out.write(self.HEADER + "\n")
        for p in self.rows:
            out.write(",".join([self.model.name, self.kind, fmt(self.alpha), fmt(p.r0), fmt(p.r),
                                fmt(p.max_mse), fmt(p.rel_mse)]) + "\n")
        return out.getvalue()


def fmt(x) -> str:
    """Nine significant digits; infinities as ``inf``."""
    if isinstance(x, str):
        return x
    if isinstance(x, int) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def _threads():
    try:
        return max(1, int(os.environ.get("ROBICURVE_THREADS", "1")))
    except ValueError:
        return 1


def risk_table(model, kind: str, r0_grid, r_grid, alpha=1) -> RiskReport:
    """Cross-product table of ``(r0, r, maxMSE, relMSE)`` rows."""
    r0_grid = sorted(float(v) for v in r0_grid)
    r_grid = sorted(float(v) for v in r_grid)
    if any(v < 0 for v in r0_grid + r_grid):
        raise ValueError("radii must be nonnegative")

    def row(pair):
        r0, r = pair
        mse = solve_cached(model, kind, r0, alpha).max_mse(r)
        return RiskPoint(r0, r, mse, rel_mse(model, kind, r0, r, alpha))

    pairs = [(a, b) for a in r0_grid for b in r_grid]
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, pairs))
    else:
        rows = [row(p) for p in pairs]
    return RiskReport(model, kind, alpha, rows)
