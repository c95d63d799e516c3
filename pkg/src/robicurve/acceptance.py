"""Acceptance criteria, each returning a pass/fail record with the measured numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import dist_kernel as dk
from ._curves import NeighborhoodSpec
from .dist_kernel import QuadratureSpec, gauss_expect, integrate
from .estimators import Contamination, SimConfig, monte_carlo_mse
from .ic_solver import (
    nonadaptivity_ratio,
    scale_c_crossover_radius,
    solve,
    solve_location,
    solve_regression_c1,
    solve_scale_c,
    solve_scale_v,
)
from .maxmin_tests import make_plan, rejection_rate, saddle_check
from .models import Location, Regression, RegressorDist, Scale, classical_ic
from .radius_minimax import least_favorable_radius
from .risk import huber_coincidence
from .sp_projection import min_cone_ratio, project_ball, robust_ic_v, tv_equiv_radius


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.title}: {self.detail}"


def _result(number, title, checks):
    """``checks`` is a list of ``(ok, text)`` pairs."""
    ok = all(c for c, _ in checks)
    bad = [t for c, t in checks if not c]
    detail = "; ".join(bad if bad else [t for _, t in checks][:6])
    return CriterionResult(number, title, ok, detail)


def minimal_bias():
    checks = []
    b = solve_location(1, math.inf).bias
    checks.append((abs(b - math.sqrt(math.pi / 2)) <= 1e-6, f"b_min(1)={b:.9f}"))
    for k in (2, 3, 5):
        bk = solve_location(k, math.inf).bias
        ref = k * math.gamma(k / 2) / (math.sqrt(2) * math.gamma((k + 1) / 2))
        checks.append((abs(bk - ref) <= 1e-6, f"b_min({k})={bk:.9f} vs {ref:.9f}"))
    sc = solve_scale_c(math.inf)
    checks.append((abs(sc.extras["alpha"] - 0.6745) <= 1e-4, f"alpha_inf={sc.extras['alpha']:.6f}"))
    checks.append((abs(sc.bias - 1.166) <= 1e-3, f"scale-c b_min={sc.bias:.6f}"))
    sv = solve_scale_v(math.inf)
    checks.append((abs(sv.bias - math.sqrt(math.pi * math.e / 2)) <= 1e-3, f"omega_min={sv.bias:.6f}"))
    return _result(1, "minimal-bias constants", checks)


def huber_identity():
    checks = []
    for r in np.geomspace(0.05, 5.0, 20):
        for r0 in (r, 0.5 if abs(r - 0.5) > 1e-12 else 1.0):
            h = huber_coincidence(r0, r)
            lhs = (1.0 - h["s"]) * h["max_mse"]
            rel = abs(lhs - h["max_var"]) / h["max_var"]
            checks.append((rel <= 1e-8, f"r0={r0:.4g} r={r:.4g}: (1-s)maxMSE={lhs:.6g} maxVar={h['max_var']:.6g}"))
    return _result(2, "Huber coincidence (1-s)maxMSE = maxVar", checks)


def scale_regime_switch():
    r = scale_c_crossover_radius()
    return _result(3, "scale-c lower clipping switch", [(abs(r - 0.92) <= 0.01, f"r={r:.6f}")])


def radius_minimax_bound():
    checks = []
    for name, model, kind in (("location", Location(1), "c"), ("scale-c", Scale(), "c"),
                              ("scale-v", Scale(), "v")):
        for r in (0.1, 0.25, 0.5, 1.0, 2.0):
            res = least_favorable_radius(model, kind, r / 3, 3 * r)
            checks.append((res.inefficiency <= 0.125 + 1e-3,
                           f"{name} r={r:g}: {res.inefficiency:.4f}"))
    return _result(4, "radius-minimax inefficiency <= 12.5%", checks)


def high_dimension():
    checks = []
    ic = solve_location(200, math.inf)
    ratio = ic.bias / math.sqrt(200)
    checks.append((0.99 <= ratio <= 1.01, f"b_min/sqrt(k)={ratio:.5f}"))
    v = ic.variance / 200
    checks.append((0.97 <= v <= 1.03, f"E|eta|^2/k={v:.5f}"))
    res = least_favorable_radius(Location(50), "c", 0.0, 3.0)
    checks.append((res.inefficiency <= 0.05, f"k=50 relMSE-1 max={res.inefficiency:.4f} at r0={res.r_star:.3f}"))
    return _result(5, "k-dimensional limits", checks)


def regression_coincidence():
    checks = []
    K = RegressorDist.standard_normal(1)
    worst = 0.0
    for r in (0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0):
        reg = solve_regression_c1(r, K, alpha=2)
        loc = solve_location(1, r)
        for a, b in ((reg.bias, loc.bias), (reg.variance, loc.variance)):
            worst = max(worst, abs(a - b))
    checks.append((worst <= 1e-8, f"alpha=2 vs location max diff={worst:.2e}"))
    worst = 0.0
    point = RegressorDist.point_mass(1.0)
    for r in (0.1, 0.5, 1.0, 3.0):
        reg = solve_regression_c1(r, point, alpha=1)
        loc = solve_location(1, r)
        u = np.linspace(-6, 6, 121)
        worst = max(worst, abs(reg.bias - loc.bias), abs(reg.variance - loc.variance),
                    float(np.max(np.abs(np.ravel(reg((np.ones_like(u), u))) - loc(u)))))
    checks.append((worst <= 1e-10, f"degenerate design max diff={worst:.2e}"))
    return _result(6, "regression coincidences", checks)


def tv_equivalence():
    checks = []
    top = 1.0 / math.sqrt(2.0 * math.pi)
    grid = top * np.arange(1, 51) / 51
    ratios = [tv_equiv_radius(r) / r for r in grid]
    checks.append((min(ratios) >= 2.2, f"min r~/r={min(ratios):.4f}"))
    for q in (0.01, 0.99):
        ratio = tv_equiv_radius(q * top) / (q * top)
        checks.append((ratio > 10, f"r~/r at {q:g} of range={ratio:.2f}"))
    u = np.linspace(-5, 5, 200)
    worst = 0.0
    for r in (0.05, 0.2, 0.35):
        sp = project_ball(Location(1), "v", r).sp_ic(u)
        ic = robust_ic_v(Location(1), tv_equiv_radius(r))
        worst = max(worst, float(np.max(np.abs(sp - ic(u)))))
    checks.append((worst <= 1e-8, f"pointwise max diff={worst:.2e}"))
    return _result(7, "TV equivalence radius", checks)


def cone_ratio_check():
    a, ratio = min_cone_ratio()
    return _result(8, "cone projection ratio", [(abs(ratio - 0.85) <= 0.01, f"min ratio={ratio:.5f} at a={a:.4f}")])


def sp_hellinger_contamination():
    checks = []
    u = np.linspace(-6, 6, 241)
    for model, r in ((Location(1), 0.3), (Scale(), 0.45)):
        sp = project_ball(model, "h", r).sp_ic(u)
        cl = classical_ic(model)(u)
        d = float(np.max(np.abs(sp - cl)))
        checks.append((d <= 1e-12, f"{model.name} h r={r}: max diff={d:.1e}"))
    bp = project_ball(Location(1), "c", 0.5)
    sup = max(float(np.max(np.abs(bp.sp_ic(np.linspace(-L, L, 101))))) for L in (10, 100, 1e3, 1e4))
    checks.append((sup > 1e3 and bp.unbounded, f"sup|rho_c| on expanding grid={sup:.3g}"))
    return _result(9, "sp-robust Hellinger and contamination curves", checks)


def adaptivity():
    checks = []
    sym = [RegressorDist.two_point(1.0, -1.0, 0.5), RegressorDist.standard_normal(1)]
    for K in sym:
        for r in (0.25, 1.0, 4.0):
            v = nonadaptivity_ratio(r, K)
            checks.append((abs(v) <= 1e-8, f"symmetric {K.kind} r={r}: {v:.1e}"))
    asym = RegressorDist.two_point(1.0, -4.0, 0.8)
    v0 = nonadaptivity_ratio(0.0, asym)
    checks.append((abs(v0) <= 1e-8, f"r=0 asymmetric: {v0:.1e}"))
    v1 = nonadaptivity_ratio(1.0, asym)
    checks.append((v1 > 0, f"asymmetric r=1: {v1:.4f}"))
    return _result(10, "robust adaptivity ratios", checks)


def maxmin_monte_carlo(reps=10_000, n=10_000, seed=20240611):
    checks = []
    for i, kind in enumerate("hvc"):
        plan = make_plan(kind, 1.0, 0.1, 0.1, 0.05)
        size, se0 = rejection_rate(plan, "null", n, reps, seed + 2 * i)
        power, se1 = rejection_rate(plan, "alt", n, reps, seed + 2 * i + 1)
        checks.append((abs(size - 0.05) <= 3 * se0, f"{kind} size={size:.4f}+-{se0:.4f}"))
        checks.append((abs(power - plan.asymptotic_power) <= 3 * se1,
                       f"{kind} power={power:.4f}+-{se1:.4f} vs {plan.asymptotic_power:.4f}"))
    return _result(11, "maxmin tests by Monte Carlo", checks)


def saddle_property():
    checks = []
    for kind in "hvc":
        gap, q = saddle_check(make_plan(kind, 1.0, 0.1, 0.1, 0.05), 200, seed=7)
        checks.append((gap >= -1e-8, f"{kind}: min(|g10|-|q10|)={gap:.2e}, |q10|={q:.5f}"))
    return _result(12, "saddle property", checks)


def _chi_density(k):
    return lambda x: stats.chi.pdf(x, k)


def oracle_equivalence():
    checks = []
    pos = QuadratureSpec(domain=(0.0, math.inf))
    grid = np.geomspace(1e-3, 1e2, 16)
    worst = 0.0
    for c in grid:
        pairs = [
            (dk.gauss_excess(c), gauss_expect(lambda u: np.maximum(u - c, 0.0), (c,))),
            (dk.gauss_excess(-c), gauss_expect(lambda u: np.maximum(u + c, 0.0), (-c,))),
            (dk.clipped_abs_moment(c), gauss_expect(lambda u: np.maximum(np.abs(u) - c, 0.0), (-c, c))),
            (dk.clipped_second_moment(c), gauss_expect(lambda u: np.minimum(u * u, c * np.abs(u)), (-c, c))),
            (dk.truncated_square_moment(c), gauss_expect(lambda u: np.minimum(u * u, c * c), (-c, c))),
            (dk.square_upper_excess(c), gauss_expect(lambda u: np.maximum(u * u - c, 0.0), (-math.sqrt(c), math.sqrt(c)))),
            (dk.square_lower_excess(c), gauss_expect(lambda u: np.maximum(c - u * u, 0.0), (-math.sqrt(c), math.sqrt(c)))),
        ]
        for k in (2, 3, 5):
            m = dk.chi_clipped_moments(k, c)
            f = _chi_density(k)
            pairs.append((m.excess, integrate(lambda x: np.maximum(x - c, 0.0) * f(x), pos, (c,))))
            pairs.append((m.clipped_second, integrate(lambda x: np.minimum(x * x, c * x) * f(x), pos, (c,))))
            pairs.append((dk.chi_truncated_square(k, c), integrate(lambda x: np.minimum(x * x, c * c) * f(x), pos, (c,))))
        for alpha in (0.5, 1.0):
            sm = dk.scale_clipped_moments(alpha, c)
            a2 = alpha * alpha
            cl = lambda u: np.clip(u * u - a2, -c, c)
            kinks = [s * math.sqrt(t) for t in (a2 - c, a2, a2 + c) if t > 0 for s in (-1, 1)]
            pairs.append((sm.clipped_mean, gauss_expect(cl, kinks)))
            pairs.append((sm.clipped_second, gauss_expect(lambda u: cl(u) * (u * u - a2), kinks)))
            pairs.append((sm.clipped_square, gauss_expect(lambda u: cl(u) ** 2, kinks)))
            pairs.append((sm.excess_abs, gauss_expect(lambda u: np.maximum(np.abs(u * u - a2) - c, 0.0), kinks)))
        worst = max(worst, max(abs(float(a) - b) for a, b in pairs))
    checks.append((worst <= 1e-9, f"closed forms vs quadrature max diff={worst:.2e}"))
    checks.append((solver_residuals_by_quadrature() <= 1e-9, "solver residuals by quadrature"))
    return _result(13, "oracle equivalence", checks)


def solver_residuals_by_quadrature():
    """Worst defining-equation residual of the solvers, recomputed by quadrature."""
    worst = 0.0
    for r in (0.1, 0.5, 1.0, 2.0):
        ic = solve_location(1, r)
        c = ic.clip_upper
        pts = (-c, c)
        eq = [gauss_expect(ic, pts), gauss_expect(lambda u: ic(u) * u, pts) - 1.0,
              gauss_expect(lambda u: np.maximum(np.abs(ic.A * u) - ic.bias, 0.0), pts) - r * r * ic.bias]
        worst = max(worst, *map(abs, eq))

        ic = solve_scale_c(r)
        a2, c = ic.extras["alpha"] ** 2, ic.extras["c"]
        pts = [s * math.sqrt(t) for t in (a2 - c, a2, a2 + c) if t > 0 for s in (-1, 1)]
        eq = [gauss_expect(ic, pts), gauss_expect(lambda u: ic(u) * (u * u - 1.0), pts) - 1.0,
              gauss_expect(lambda u: np.maximum(np.abs(ic.A * (u * u - a2)) - ic.bias, 0.0), pts)
              - r * r * ic.bias]
        worst = max(worst, *map(abs, eq))

        for ic, lam in ((solve_scale_v(r), lambda u: u * u - 1.0), (robust_ic_v(Location(1), r), lambda u: u)):
            lo, hi = ic.clip_lower / ic.A, ic.clip_upper / ic.A
            if ic.model.variant == "scale":
                pts = [s * math.sqrt(1 + t) for t in (lo, hi) if t > -1 for s in (-1, 1)]
            else:
                pts = [lo, hi]
            eq = [gauss_expect(ic, pts), gauss_expect(lambda u: ic(u) * lam(u), pts) - 1.0,
                  gauss_expect(lambda u: np.maximum(ic.clip_lower - ic.A * lam(u), 0.0), pts)
                  - r * r * ic.bias,
                  gauss_expect(lambda u: np.maximum(ic.A * lam(u) - ic.clip_upper, 0.0), pts)
                  - r * r * ic.bias]
            worst = max(worst, *map(abs, eq))

    # regression with a discrete design: sum over atoms of Gaussian integrals in u
    K = RegressorDist.two_point(1.0, -4.0, 0.8)
    for r in (0.5, 1.0):
        ic = solve(Regression(K), NeighborhoodSpec("c", r))
        b = ic.bias
        fisher = excess = 0.0
        for x, w in zip(K.atoms[:, 0], K.weights):
            f = lambda u: np.ravel(ic((np.full_like(u, x), u)))
            fisher += w * gauss_expect(lambda u: f(u) * x * u)
            excess += w * gauss_expect(lambda u: np.maximum(np.abs(ic.A * x * u) - b, 0.0))
        worst = max(worst, abs(fisher - 1.0), abs(excess - r * r * b))
    return worst


def estimator_sanity(reps=2000, n=10_000, seed=11):
    checks = []
    ic = solve_location(1, 0.5)
    rec = monte_carlo_mse(ic, Location(1), SimConfig(n=n, replications=reps, seed=seed))
    checks.append((abs(rec.nmse - ic.variance) <= 3 * rec.mcse,
                   f"ideal nMSE={rec.nmse:.4f}+-{rec.mcse:.4f} vs E|eta|^2={ic.variance:.4f}"))
    for name, model, cur in (("location", Location(1), ic), ("scale", Scale(), solve_scale_c(0.5))):
        for H in (Contamination(0.5), Contamination(0.5, "normal", 3.0, 5.0)):
            rec = monte_carlo_mse(cur, model, SimConfig(n=n, replications=reps, seed=seed + 1, contamination=H))
            bound = cur.max_mse(0.5)
            checks.append((rec.nmse <= bound + 3 * rec.mcse,
                           f"{name} {H.describe()} nMSE={rec.nmse:.4f}+-{rec.mcse:.4f} vs maxMSE={bound:.4f}"))
    return _result(14, "estimator sanity", checks)


CRITERIA = {
    1: minimal_bias,
    2: huber_identity,
    3: scale_regime_switch,
    4: radius_minimax_bound,
    5: high_dimension,
    6: regression_coincidence,
    7: tv_equivalence,
    8: cone_ratio_check,
    9: sp_hellinger_contamination,
    10: adaptivity,
    11: maxmin_monte_carlo,
    12: saddle_property,
    13: oracle_equivalence,
    14: estimator_sanity,
}


def run_criterion(number: int) -> CriterionResult:
    try:
        return CRITERIA[number]()
    except Exception as exc:  # a crash is a failure of that criterion, not of the suite
        return CriterionResult(number, CRITERIA[number].__name__, False, f"error: {exc!r}")


def run_all(numbers=None, echo=None):
    out = []
    for k in numbers or sorted(CRITERIA):
        res = run_criterion(k)
        if echo:
            echo(res.line())
        out.append(res)
    return out
