"""Projections of scores onto tangent balls, sp-robust ICs and cone projections."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._curves import InfluenceCurve, NeighborhoodSpec
from ._roots import find_root, golden_section
from .dist_kernel import Phi, gauss_expect, phi
from .exceptions import DegenerateGenerators, RadiusTooLarge, SolverNonconvergence
from .models import GaussLaw, ShiftedChiSquareLaw, Location, classical_ic, scores as model_scores
from .models import _split_obs, evaluate_score

_SQRT8 = math.sqrt(8.0)


# -- one-dimensional clip constants -----------------------------------------------


def _left_bracket(law, f):
    # a point where the increasing function f is negative
    if math.isfinite(law.inf):
        return law.inf
    t = -1.0
    while f(t) >= 0:
        t *= 2.0
    return t


def lower_clip(law, r):
    """``v'`` with ``E (v' - L)_+ = r``."""
    f = lambda t: law.lower_excess(t) - r
    return find_root(f, _left_bracket(law, f), 1.0, name="lower clip")


def upper_clip(law, r):
    """``v''`` with ``E (L - v'')_+ = r``."""
    f = lambda t: r - law.upper_excess(t)
    return find_root(f, _left_bracket(law, f), 1.0, name="upper clip")


def _prob_below(law, t):
    if isinstance(law, ShiftedChiSquareLaw):
        from .dist_kernel import square_partial_moment

        return square_partial_moment(0, 0.0, 1.0 + t)
    pos = law.scales > 0
    return float(law.weights[pos] @ Phi(t / law.scales[pos])) + (law.weights[~pos].sum() if t > 0 else 0.0)


# -- ball projections -----------------------------------------------------------


@dataclass(eq=False)
class BallProjection:
    """Nonlinear projection of the scores on a tangent ball of radius ``r``.

    ``lower``/``upper`` hold the per-coordinate clipping points of ``Lambda``
    (``-inf``/``inf`` where no clipping happens), ``shift`` the additive
    constant of the contamination case and ``shrink`` the Hellinger factor.
    """

    kind: str
    r: float
    model: object
    lower: np.ndarray
    upper: np.ndarray
    shift: float
    shrink: np.ndarray
    C: np.ndarray
    unbounded: bool = False
    residuals: dict = field(default_factory=dict)

    def projected(self, obs):
        """Projected scores ``Lambda~`` as an ``(n, k)`` array."""
        lam = _as_2d(evaluate_score(self.model, obs))
        if self.kind == "h":
            return lam * self.shrink
        return np.clip(lam, self.lower, self.upper) + self.shift

    def sp_ic(self, obs):
        """The sp-robust influence curve ``C^{-1} Lambda~``."""
        vals = self.projected(obs) @ np.linalg.inv(self.C).T
        return vals[:, 0] if vals.shape[1] == 1 else vals

    def nearest(self, obs):
        """``Lambda - Lambda~``, the nearest element of the ball."""
        return _as_2d(evaluate_score(self.model, obs)) - self.projected(obs)


def _as_2d(lam):
    lam = np.asarray(lam, dtype=float)
    return lam[:, None] if lam.ndim == 1 else lam


def _cross_matrix(sv, laws, lower, upper):
    """``E clip(Lambda_j) Lambda_i``."""
    m = sv.model
    k = len(laws)
    diag = np.array([law.clip_cross(lo, hi) for law, lo, hi in zip(laws, lower, upper)])
    if m.variant != "regression" or k == 1 or not m.regressor.has_atoms:
        return np.diag(diag)
    X, w = m.regressor.atoms, m.regressor.weights
    C = np.empty((k, k))
    ax = np.abs(X)
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(k):
            band = np.where(ax[:, j] > 0,
                            Phi(upper[j] / np.where(ax[:, j] > 0, ax[:, j], 1.0))
                            - Phi(lower[j] / np.where(ax[:, j] > 0, ax[:, j], 1.0)), 0.0)
            C[j] = (w * X[:, j] * band) @ X
    return C


def project_ball(scores, kind: str, r: float) -> BallProjection:
    """Project the score coordinates on the ``kind`` tangent ball of radius ``r``."""
    sv = scores if hasattr(scores, "fisher_info") else model_scores(scores)
    if not r >= 0 or math.isinf(r):
        raise ValueError("radius must be finite and nonnegative")
    laws = sv.coordinate_laws()
    k = len(laws)
    inf, ninf = np.full(k, math.inf), np.full(k, -math.inf)
    if kind == "h":
        I = sv.fisher_info
        if 8.0 * r * r >= np.min(np.diag(I)):
            raise RadiusTooLarge("Hellinger projection needs 8 r^2 < min_j I_jj")
        shrink = 1.0 - _SQRT8 * r / np.sqrt(np.diag(I))
        C = np.diag(shrink) @ I
        return BallProjection("h", r, sv.model, ninf, inf, 0.0, shrink, C)
    if kind == "v":
        if any(2.0 * r >= law.abs_mean() for law in laws):
            raise RadiusTooLarge("total variation projection needs 2 r < E|Lambda_j|")
        if r == 0:
            lower, upper = ninf, inf
        else:
            lower = np.array([lower_clip(law, r) for law in laws])
            upper = np.array([upper_clip(law, r) for law in laws])
        C = _cross_matrix(sv, laws, lower, upper)
        res = {f"lower_{j}": laws[j].lower_excess(lower[j]) - r for j in range(k) if r > 0}
        res |= {f"upper_{j}": laws[j].upper_excess(upper[j]) - r for j in range(k) if r > 0}
        return BallProjection("v", r, sv.model, lower, upper, 0.0, np.ones(k), C, residuals=res)
    if kind == "c":
        if any(r >= -law.inf for law in laws):
            raise RadiusTooLarge("contamination projection needs r < -inf Lambda_j")
        upper = inf if r == 0 else np.array([upper_clip(law, r) for law in laws])
        C = _cross_matrix(sv, laws, ninf, upper)
        unbounded = r > 0 and any(math.isinf(law.inf) for law in laws)
        res = {f"centering_{j}": r - laws[j].upper_excess(upper[j]) for j in range(k) if r > 0}
        return BallProjection("c", r, sv.model, ninf, upper, r, np.ones(k), C,
                              unbounded=unbounded, residuals=res)
    raise ValueError("kind must be 'h', 'v' or 'c'")


def tv_equiv_radius(r: float, model=None) -> float:
    """Radius at which the optimally robust TV curve equals the sp-robust one."""
    bp = project_ball(model_scores(model or Location(1)), "v", r)
    if r == 0:
        return 0.0
    return math.sqrt(r / float(bp.upper[0] - bp.lower[0]))


# -- optimally robust total variation curves ---------------------------------------


def _tv_coordinate(law, r2, others=0.0):
    """Solve ``r2 a (hi - lo) = a m + others`` with ``m = E(lo - L)_+ = E(L - hi)_+``."""

    def hi_of(lo):
        m = law.lower_excess(lo)
        return find_root(lambda h: law.upper_excess(h) - m, 0.0, 1.0, name="tv centering")

    def gap(lo):
        # bias equation multiplied through by the positive E clip(L) L
        hi = hi_of(lo)
        return r2 * (hi - lo) - law.lower_excess(lo) - others * law.clip_cross(lo, hi)

    left = law.inf + 1e-12 if math.isfinite(law.inf) else -1.0
    while math.isinf(law.inf) and gap(left) < 0:
        left *= 2.0
    lo = find_root(gap, left, 0.0, name="tv bias equation", expand=False)
    hi = hi_of(lo)
    return lo, hi, 1.0 / law.clip_cross(lo, hi)


def robust_ic_v(model, r: float, variant: str = "sinf") -> InfluenceCurve:
    """Optimally robust IC over total variation balls.

    One-dimensional models use the generic clipped-score system.  For
    ``Location(k)`` with ``k > 1`` the ``variant`` picks the Euclidean
    (``s2``) or maximum (``sinf``) combination of the coordinate
    oscillations.
    """
    if variant not in ("s2", "sinf"):
        raise ValueError("variant must be 's2' or 'sinf'")
    if not r >= 0:
        raise ValueError("radius must be nonnegative")
    sv = model_scores(model)
    nbd = NeighborhoodSpec("v", r)
    if r == 0:
        ic = classical_ic(model)
        ic.nbd = nbd
        return ic
    laws = sv.coordinate_laws()
    k = len(laws)
    if k > 1 and model.variant != "location":
        raise NotImplementedError("multivariate total variation curves are implemented for location only")
    if math.isinf(r):
        if k > 1:
            raise NotImplementedError("minimal oscillation curves are implemented for k = 1")
        law = laws[0]
        omega = 1.0 / law.upper_excess(0.0)
        p_lo = _prob_below(law, 0.0)
        lo_v, hi_v = -omega * (1.0 - p_lo), omega * p_lo

        def step(obs, _lo=lo_v, _hi=hi_v):
            lam = evaluate_score(model, obs)
            return np.where(lam > 0, _hi, _lo)

        return InfluenceCurve(model, nbd, A=omega, center=0.0, clip_lower=lo_v, clip_upper=hi_v,
                              bias=omega, variance=omega * omega * p_lo * (1.0 - p_lo), func=step,
                              extras={"limit": "min_bias"})

    r2 = r * r
    if k == 1 or variant == "s2":
        sols = [_tv_coordinate(law, r2) for law in laws]
    else:
        sols = [_tv_coordinate(law, r2 / k) for law in laws]
        for _ in range(200):
            excess = [a * law.lower_excess(lo) for (lo, _, a), law in zip(sols, laws)]
            total = sum(excess)
            new = [_tv_coordinate(law, r2, total - e) for law, e in zip(laws, excess)]
            step = max(abs(n[0] - o[0]) + abs(n[1] - o[1]) for n, o in zip(new, sols))
            sols = new
            if step < 1e-13:
                break
        else:
            raise SolverNonconvergence("shared-budget sweep did not converge", {"step": step})
    lo = np.array([s[0] for s in sols])
    hi = np.array([s[1] for s in sols])
    a = np.array([s[2] for s in sols])
    widths = a * (hi - lo)
    excess = np.array([ai * law.lower_excess(l) for ai, law, l in zip(a, laws, lo)])
    budget = excess if (k == 1 or variant == "s2") else np.full(k, excess.sum())
    residuals = {
        "bias": float(np.max(np.abs(widths - budget / r2))),
        "centering": float(max(abs(law.clip_mean(l, h)) for law, l, h in zip(laws, lo, hi))),
        "fisher": float(np.max(np.abs(a * np.array([law.clip_cross(l, h) for law, l, h in zip(laws, lo, hi)]) - 1.0))),
    }
    bias = float(np.sqrt(np.sum(widths**2))) if variant == "s2" else float(np.max(widths))
    variance = float(sum(ai * ai * law.clip_square(l, h) for ai, law, l, h in zip(a, laws, lo, hi)))

    def func(obs, _a=a, _lo=lo, _hi=hi):
        lam = _as_2d(evaluate_score(model, obs))
        vals = _a * np.clip(lam, _lo, _hi)
        return vals[:, 0] if vals.shape[1] == 1 else vals

    A = float(a[0]) if k == 1 else np.diag(a)
    return InfluenceCurve(model, nbd, A=A, center=0.0,
                          clip_lower=float(a[0] * lo[0]) if k == 1 else a * lo,
                          clip_upper=float(a[0] * hi[0]) if k == 1 else a * hi,
                          bias=bias, variance=variance, func=func, residuals=residuals,
                          extras={"variant": variant, "lo": lo, "hi": hi})


# -- cone projections -----------------------------------------------------------


@dataclass(frozen=True)
class ConeProjection:
    """Projections of ``kappa`` on the span and on the convex cone of generators.

    Coefficients refer to the generators; ``bar_norm`` and ``hat_norm`` are the
    norms of the two projections.
    """

    gram: np.ndarray
    h: np.ndarray
    kappa_norm2: float
    bar_coef: np.ndarray
    hat_coef: np.ndarray
    bar_norm: float
    hat_norm: float
    residuals: dict

    @property
    def ratio(self):
        return self.hat_norm / self.bar_norm


def _cone_coef(G, h):
    m = len(h)
    best = None
    for size in range(m + 1):
        for S in itertools.combinations(range(m), size):
            gamma = np.zeros(m)
            if S:
                idx = list(S)
                gamma[idx] = np.linalg.solve(G[np.ix_(idx, idx)], h[idx])
                if np.any(gamma[idx] < -1e-14):
                    continue
            gamma = np.maximum(gamma, 0.0)
            slack = h - G @ gamma  # <kappa - kappa_hat, g_i>
            viol = max(0.0, float(np.max(slack)))
            if best is None or viol < best[0]:
                best = (viol, gamma)
            if viol <= 1e-12:
                return gamma
    return best[1]


def cone_project_gram(gram, h, kappa_norm2) -> ConeProjection:
    """Cone and span projections from the Gram matrix and ``<kappa, g_i>``."""
    G = np.asarray(gram, dtype=float)
    h = np.asarray(h, dtype=float)
    if G.shape[0] > 10:
        raise ValueError("cone projection enumerates subsets and supports at most 10 generators")
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 1e-12 * max(ev[-1], 1.0):
        raise DegenerateGenerators("generators are linearly dependent")
    beta = np.linalg.solve(G, h)
    gamma = _cone_coef(G, h)
    hat = G @ gamma
    residuals = {
        "span_orthogonality": float(np.max(np.abs(h - G @ beta))),
        "cone_inequality": float(np.max(h - hat)),
        "cone_orthogonality": float(gamma @ h - gamma @ hat),
    }
    return ConeProjection(G, h, float(kappa_norm2), beta, gamma, math.sqrt(beta @ G @ beta),
                          math.sqrt(gamma @ G @ gamma), residuals)


def cone_project(kappa, generators, points=(), spec=None) -> ConeProjection:
    """Project ``kappa`` in ``L2(N(0, 1))``; inner products by quadrature."""
    m = len(generators)
    G = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            G[i, j] = G[j, i] = gauss_expect(lambda u: generators[i](u) * generators[j](u), points, spec)
    h = np.array([gauss_expect(lambda u: kappa(u) * g(u), points, spec) for g in generators])
    return cone_project_gram(G, h, gauss_expect(lambda u: kappa(u) ** 2, points, spec))


def tangent_cone_example(a: float):
    """Gram data for ``kappa(x) = x`` with ``sign(x)`` and a truncated sign.

    The second generator is ``mu sign(x) 1(|x| <= a)`` normalized to unit norm.
    Returns ``(gram, h, kappa_norm2)``.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    p = float(2.0 * Phi(a) - 1.0)
    mu = 1.0 / math.sqrt(p)
    g12 = math.sqrt(p)
    h = np.array([math.sqrt(2.0 / math.pi), mu * 2.0 * (float(phi(0.0)) - float(phi(a)))])
    return np.array([[1.0, g12], [g12, 1.0]]), h, 1.0


def tangent_cone_generators(a: float):
    p = float(2.0 * Phi(a) - 1.0)
    mu = 1.0 / math.sqrt(p)
    return [np.sign, lambda x: mu * np.sign(x) * (np.abs(x) <= a)]


def cone_ratio(a: float) -> float:
    """``|kappa_hat| / |kappa_bar|`` for the truncated-sign example."""
    return cone_project_gram(*tangent_cone_example(a)).ratio


def min_cone_ratio(lo: float = 0.05, hi: float = 5.0):
    """Minimize :func:`cone_ratio` over ``a``; returns ``(a, ratio)``."""
    return golden_section(cone_ratio, lo, hi, tol=1e-8)
