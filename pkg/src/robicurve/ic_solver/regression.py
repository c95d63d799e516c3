"""Regression models: conditional contamination, intercept nuisance, joint scale."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .._curves import InfluenceCurve, NeighborhoodSpec, as_matrix
from .._roots import bisect_vec, find_root
from ..dist_kernel import (
    SQRT2,
    clipped_abs_moment,
    gauss_legendre_rule,
    truncated_square_moment,
)
from ..exceptions import NonfiniteUpdate, SolverNonconvergence
from ..models import Regression, RegressionIntercept, RegressionScale, classical_ic
from ..models import _split_obs
from .scale import solve_scale_c

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_FP_TOL = 1e-14
_FP_MAXITER = 500


def _erf(t):
    return special.erf(t / SQRT2)


def _excess(s, b):
    """``E (s|U| - b)_+`` elementwise; zero where ``s == 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = s * clipped_abs_moment(np.where(s > 0, b / np.where(s > 0, s, 1.0), np.inf))
    return np.where(s > 0, out, 0.0)


def _weights_mean(s, b):
    # E u^2 min(1, b / (s|u|)) per node
    with np.errstate(divide="ignore"):
        return np.where(s > 0, _erf(b / np.where(s > 0, s, 1.0)), 1.0)


def _trunc_sq(s, b):
    # E min(s^2 u^2, b^2) per node
    with np.errstate(divide="ignore"):
        t = np.where(s > 0, b / np.where(s > 0, s, 1.0), np.inf)
    return np.where(s > 0, s * s * truncated_square_moment(t), 0.0)


def _solve_b(rule, s, r):
    """Clipping bound ``b`` with ``r^2 b = E (|A x u| - b)_+``."""
    hi = rule.expect(s) * _SQRT_2_OVER_PI / (r * r)
    return find_root(lambda b: r * r * b - rule.expect(_excess(s, b)), 0.0, hi,
                     name="regression bias equation")


def _as_A(A, k):
    A = np.asarray(A, dtype=float)
    if k == 1:
        return float(A.reshape(-1)[0])
    return A


def _conditional_func(A, b, k):
    Am = np.atleast_2d(np.asarray(A, dtype=float)) if k > 1 else None

    def func(obs):
        x, u = _split_obs(obs, k)
        Ax = x * float(A) if Am is None else x @ Am.T
        n = np.linalg.norm(Ax, axis=1) * np.abs(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(n > 0, np.minimum(1.0, b / n), 1.0)
        return Ax * (u * w)[:, None]

    return func


def _classical_for(model, nbd):
    ic = classical_ic(model)
    ic.nbd = nbd
    return ic


def solve_regression_c1(r: float, K, alpha=1, model=None) -> InfluenceCurve:
    """Minimax IC for regression under conditional contamination.

    ``alpha = 1`` bounds the averaged conditional radius and gives the
    weight ``min(1, b/|A x u|)``.  ``alpha = 2`` bounds the mean square of the
    conditional radius; its constants coincide with the one-dimensional
    location solution.
    """
    if not r >= 0:
        raise ValueError("radius must be nonnegative")
    if alpha not in (1, 2):
        raise NotImplementedError("only alpha = 1 and alpha = 2 are supported")
    model = model or Regression(K)
    nbd = NeighborhoodSpec("c", r, alpha)
    if r == 0:
        return _classical_for(model, nbd)
    if alpha == 2:
        return _solve_alpha2(r, K, model, nbd)
    if math.isinf(r):
        return _min_bias_alpha1(K, model, nbd)
    if K.k == 1 or not K.has_atoms:
        return _solve_alpha1_radial(r, K, model, nbd)
    return _solve_alpha1_matrix(r, K, model, nbd)


def _solve_alpha1_radial(r, K, model, nbd):
    # A = a I; s = |x| (k = 1) or the chi_k radius (standard normal design)
    k = K.k
    rule = K.rule(prefer_atoms=k == 1)
    s = rule.norms(1.0)
    c = _solve_b(rule, s, r)
    a = k / rule.expect(s * s * _weights_mean(s, c))
    b = a * c
    residuals = {
        "bias": c - rule.expect(_excess(s, c)) / (r * r),
        "fisher": a * rule.expect(s * s * _weights_mean(s, c)) / k - 1.0,
    }
    A = a if k == 1 else a * np.eye(k)
    return InfluenceCurve(model, nbd, A=A, center=0.0, clip_lower=-math.inf, clip_upper=b,
                          bias=b, variance=a * a * rule.expect(_trunc_sq(s, c)),
                          func=_conditional_func(A, b, k), residuals=residuals,
                          extras={"c": c, "path": "radial"})


def _solve_alpha1_matrix(r, K, model, nbd):
    k = K.k
    rule = K.rule()
    A = np.linalg.inv(K.second_moment)
    for _ in range(_FP_MAXITER):
        s = rule.norms(A)
        b = _solve_b(rule, s, r)
        A_new = np.linalg.inv(rule.outer(_weights_mean(s, b)))
        if not np.all(np.isfinite(A_new)):
            raise NonfiniteUpdate("non-finite standardizing matrix")
        step = np.max(np.abs(A_new - A))
        A = A_new
        if step <= _FP_TOL * max(1.0, np.max(np.abs(A))):
            break
    else:
        raise SolverNonconvergence("regression fixed point did not converge", {"step": step})
    s = rule.norms(A)
    b = _solve_b(rule, s, r)
    residuals = {
        "bias": b - rule.expect(_excess(s, b)) / (r * r),
        "fisher": float(np.max(np.abs(A @ rule.outer(_weights_mean(s, b)) - np.eye(k)))),
    }
    return InfluenceCurve(model, nbd, A=A, center=0.0, clip_lower=-math.inf, clip_upper=b,
                          bias=b, variance=rule.expect(_trunc_sq(s, b)),
                          func=_conditional_func(A, b, k), residuals=residuals,
                          extras={"path": "matrix"})


def _min_bias_alpha1(K, model, nbd):
    k = K.k
    if k == 1 or not K.has_atoms:
        b = math.sqrt(math.pi / 2.0) * k / K.mean_norm
        A = b if k == 1 else b * np.eye(k)
        rule = K.rule(prefer_atoms=k == 1)
        s = rule.norms(1.0)
        residuals = {"fisher": b * _SQRT_2_OVER_PI * rule.expect(s) / k - 1.0}
    else:
        # A proportional to (E x x' / |A x|)^{-1}, normalized to unit spectral norm
        rule = K.rule()
        A = np.linalg.inv(K.second_moment)
        A /= np.linalg.norm(A, 2)
        for _ in range(_FP_MAXITER):
            s = rule.norms(A)
            with np.errstate(divide="ignore"):
                inv_s = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
            A_new = np.linalg.inv(rule.outer(inv_s))
            A_new /= np.linalg.norm(A_new, 2)
            step = np.max(np.abs(A_new - A))
            A = A_new
            if step <= _FP_TOL:
                break
        else:
            raise SolverNonconvergence("min-bias fixed point did not converge", {"step": step})
        s = rule.norms(A)
        inv_s = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
        B = np.linalg.inv(_SQRT_2_OVER_PI * rule.outer(inv_s))
        b = float(np.sum(B * A) / np.sum(A * A))
        residuals = {"proportionality": float(np.max(np.abs(B - b * A)))}
        A = B

    Am = np.atleast_2d(np.asarray(A, dtype=float))

    def func(obs, _Am=Am, _b=b):
        x, u = _split_obs(obs, k)
        Ax = x @ _Am.T
        n = np.linalg.norm(Ax, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(n > 0, _b / n, 0.0)
        return Ax * (scale * np.sign(u))[:, None]

    return InfluenceCurve(model, nbd, A=_as_A(A, k), center=0.0, clip_lower=-math.inf,
                          clip_upper=0.0, bias=b, variance=b * b * rule.expect(s > 0),
                          func=func, residuals=residuals, extras={"limit": "min_bias"})


def _solve_alpha2(r, K, model, nbd):
    k = K.k
    rule = K.rule(prefer_atoms=k == 1)
    if math.isinf(r):
        A = np.linalg.inv(_SQRT_2_OVER_PI * K.second_moment)
        s = rule.norms(A)
        bias = math.sqrt(rule.expect(s * s))

        def func(obs, _A=A):
            x, u = _split_obs(obs, k)
            return (x @ _A.T) * np.sign(u)[:, None]

        return InfluenceCurve(model, nbd, A=_as_A(A, k), center=0.0, clip_lower=-math.inf,
                              clip_upper=0.0, bias=bias, variance=bias * bias, func=func,
                              extras={"limit": "min_bias"})

    # per-node conditional bound: r^2 b_x = E(|A x| |u| - b_x)_+
    A = np.linalg.inv(K.second_moment)
    for _ in range(10):
        s = rule.norms(A)
        hi = np.where(s > 0, s * _SQRT_2_OVER_PI / (r * r), 1.0)
        bx = bisect_vec(lambda b: r * r * b - _excess(s, b), np.zeros_like(s), hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(s > 0, bx / s, np.inf)
        A_new = np.linalg.inv(rule.outer(_erf(t)))
        step = np.max(np.abs(A_new - A))
        A = A_new
        if step <= _FP_TOL * max(1.0, np.max(np.abs(A))):
            break
    s = rule.norms(A)
    bx = t * s
    tbar = float(np.mean(t[np.isfinite(t)]))
    residuals = {
        "bias": float(np.max(np.abs(bx - _excess(s, bx) / (r * r)))),
        "fisher": float(np.max(np.abs(A @ rule.outer(_erf(t)) - np.eye(k)))),
    }
    Am = np.atleast_2d(A)

    def func(obs, _Am=Am, _t=tbar):
        x, u = _split_obs(obs, k)
        Ax = x @ _Am.T
        au = np.abs(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(au > 0, np.minimum(1.0, _t / au), 1.0)
        return Ax * (u * w)[:, None]

    return InfluenceCurve(model, nbd, A=_as_A(A, k), center=0.0, clip_lower=-math.inf,
                          clip_upper=tbar, bias=math.sqrt(rule.expect(bx * bx)),
                          variance=rule.expect(_trunc_sq(s, bx)), func=func,
                          residuals=residuals, extras={"c": tbar, "path": "conditional"})


# -- intercept as nuisance ------------------------------------------------------


def solve_regression_intercept(r: float, K) -> InfluenceCurve:
    """Minimax IC for the slope when an unknown intercept is a nuisance.

    The curve has the form ``(A x + a) u min(1, b / |(A x + a) u|)``; ``a`` is
    reported as ``center`` and vanishes for symmetric designs.
    """
    if not r >= 0:
        raise ValueError("radius must be nonnegative")
    if math.isinf(r):
        raise ValueError("the intercept solver needs a finite radius")
    model = RegressionIntercept(K)
    nbd = NeighborhoodSpec("c", r, 1)
    k = K.k
    if not K.has_atoms and k > 1:
        # spherical design: the nuisance direction is orthogonal by symmetry
        base = solve_regression_c1(r, K)
        return InfluenceCurve(model, nbd, A=base.A, center=np.zeros(k),
                              clip_lower=base.clip_lower, clip_upper=base.clip_upper,
                              bias=base.bias, variance=base.variance, func=base.func,
                              residuals=base.residuals, extras={"path": "symmetric"})
    rule = K.rule(prefer_atoms=True)
    Z = np.column_stack([rule.X, np.ones(len(rule))])
    zrule = type(rule)("atoms", rule.weights, X=Z)
    target = np.hstack([np.eye(k), np.zeros((k, 1))])
    Ezz = zrule.outer(np.ones(len(rule)))
    B = target @ np.linalg.inv(Ezz)
    if r == 0:
        b = math.inf
        s = zrule.norms(B)
        residuals = {"fisher": float(np.max(np.abs(B @ Ezz - target)))}
    else:
        for _ in range(_FP_MAXITER):
            s = zrule.norms(B)
            b = _solve_b(zrule, s, r)
            B_new = target @ np.linalg.inv(zrule.outer(_weights_mean(s, b)))
            if not np.all(np.isfinite(B_new)):
                raise NonfiniteUpdate("non-finite intercept update")
            step = np.max(np.abs(B_new - B))
            B = B_new
            if step <= _FP_TOL * max(1.0, np.max(np.abs(B))):
                break
        else:
            raise SolverNonconvergence("intercept fixed point did not converge", {"step": step})
        s = zrule.norms(B)
        b = _solve_b(zrule, s, r)
        residuals = {
            "bias": b - zrule.expect(_excess(s, b)) / (r * r),
            "fisher": float(np.max(np.abs(B @ zrule.outer(_weights_mean(s, b)) - target))),
        }
    A, a = B[:, :k], B[:, k]
    variance = zrule.expect(s * s) if math.isinf(b) else zrule.expect(_trunc_sq(s, b))

    def func(obs, _A=A, _a=a, _b=b):
        x, u = _split_obs(obs, k)
        Ax = x @ _A.T + _a
        n = np.linalg.norm(Ax, axis=1) * np.abs(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(n > 0, np.minimum(1.0, _b / n), 1.0)
        return Ax * (u * w)[:, None]

    return InfluenceCurve(model, nbd, A=_as_A(A, k), center=a if k > 1 else float(a[0]),
                          clip_lower=-math.inf, clip_upper=b, bias=b, variance=variance,
                          func=func, residuals=residuals, extras={"path": "matrix"})


def nonadaptivity_ratio(r: float, K) -> float:
    """Relative excess risk from not knowing the intercept."""
    known = solve_regression_c1(r, K)
    unknown = solve_regression_intercept(r, K)
    return unknown.max_mse(r) / known.max_mse(r) - 1.0


# -- regression and scale jointly -----------------------------------------------

_U_FIXED = np.array([0.0, 1.0, 2.0, 3.0, 4.5, 6.0, 8.0, 12.0])
_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _u_grid(s, t, a2, b):
    """Per-node Gauss-Legendre grid in ``u >= 0`` with kinks of the weight as edges."""
    # |N(u)| = b  <=>  t^2 v^2 + (s^2 - 2 t^2 a2) v + t^2 a2^2 - b^2 = 0 with v = u^2
    qa = t * t
    qb = s * s - 2.0 * qa * a2
    qc = qa * a2 * a2 - b * b
    disc = qb * qb - 4.0 * qa * qc
    sq = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        v1 = np.where(qa > 0, (-qb - sq) / (2.0 * qa), -qc / qb)
        v2 = np.where(qa > 0, (-qb + sq) / (2.0 * qa), -qc / qb)
    roots = []
    for v in (v1, v2):
        ok = (disc >= 0) & np.isfinite(v) & (v > 0)
        roots.append(np.where(ok, np.sqrt(np.where(ok, v, 0.0)), 0.0))
    edges = np.sort(np.column_stack([np.broadcast_to(_U_FIXED, (s.size, _U_FIXED.size)),
                                     np.minimum(roots[0], 12.0)[:, None],
                                     np.minimum(roots[1], 12.0)[:, None]]), axis=1)
    lo, hi = edges[:, :-1, None], edges[:, 1:, None]
    half = 0.5 * (hi - lo)
    u = (0.5 * (lo + hi) + half * _GL_X).reshape(s.size, -1)
    w = (half * _GL_W).reshape(s.size, -1)
    # factor 2 for u < 0 (all integrands are even in u)
    w = 2.0 * w * np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    return u, w


class _JointMoments:
    def __init__(self, s, t, z, b):
        a2 = 1.0 + z
        self.s, self.t, self.z, self.b = s, t, z, b
        u, w = _u_grid(s, t, a2, b)
        v = u * u
        sc = v - a2
        N = np.sqrt((s[:, None] * u) ** 2 + (t * sc) ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            wt = np.where(N > 0, np.minimum(1.0, b / N), 1.0)
        self.u2w = np.sum(w * v * wt, axis=1)
        self.scw = np.sum(w * (v - 1.0) * wt, axis=1)
        self.ww = np.sum(w * wt, axis=1)
        self.sc_fisher = np.sum(w * sc * (v - 1.0) * wt, axis=1)
        self.excess = np.sum(w * np.maximum(N - b, 0.0), axis=1)
        self.norm2 = np.sum(w * np.minimum(N, b) ** 2, axis=1)


def _joint_excess(rule, s, t, z, b):
    u, w = _u_grid(s, t, 1.0 + z, b)
    N = np.sqrt((s[:, None] * u) ** 2 + (t * (u * u - 1.0 - z)) ** 2)
    return rule.expect(np.sum(w * np.maximum(N - b, 0.0), axis=1))


def solve_regression_scale(r: float, K, target: str = "joint") -> InfluenceCurve:
    """Minimax ICs in the regression model with unknown error scale.

    ``target`` selects the slope part (``theta``), the scale part (``sigma``)
    or both stacked with a common clipping weight (``joint``).
    """
    model = RegressionScale(K)
    if target == "theta":
        ic = solve_regression_c1(r, K, model=model)
        ic.extras = {**ic.extras, "target": "theta"}
        return ic
    if target == "sigma":
        ic = solve_scale_c(r)
        ic.model = model
        ic.extras = {**ic.extras, "target": "sigma", "z": ic.extras.get("alpha", 1.0) ** 2 - 1.0}
        return ic
    if target != "joint":
        raise ValueError("target must be 'theta', 'sigma' or 'joint'")
    if not r >= 0:
        raise ValueError("radius must be nonnegative")
    if math.isinf(r):
        raise ValueError("the joint solver needs a finite radius")
    nbd = NeighborhoodSpec("c", r, 1)
    if r == 0:
        return _classical_for(model, nbd)
    return _solve_joint(r, K, model, nbd)


def _solve_joint(r, K, model, nbd):
    k = K.k
    rule = K.rule()
    start_rg = solve_regression_c1(r, K)
    start_sc = solve_scale_c(r)
    A_rg = as_matrix(start_rg.A, k)
    A_sc = float(start_sc.A)
    z = start_sc.extras["alpha"] ** 2 - 1.0
    b = max(start_rg.bias, start_sc.bias)

    def solve_b(s, t, z):
        hi = b_guess = max(b, 1e-3)
        while r * r * hi - _joint_excess(rule, s, t, z, hi) < 0:
            hi *= 2.0
        lo = 0.5 * b_guess
        while lo > 1e-12 and r * r * lo - _joint_excess(rule, s, t, z, lo) > 0:
            lo *= 0.5
        return find_root(lambda bb: r * r * bb - _joint_excess(rule, s, t, z, bb), lo, hi,
                         name="joint bias equation", expand=False)

    for it in range(_FP_MAXITER):
        s = rule.norms(A_rg)
        b = solve_b(s, A_sc, z)
        m = _JointMoments(s, A_sc, z, b)
        # centering: E (u^2 - 1 - z) w = 0
        z_new = rule.expect(m.scw) / rule.expect(m.ww)
        A_rg_new = np.linalg.inv(rule.outer(m.u2w))
        m2 = _JointMoments(s, A_sc, z_new, b)
        A_sc_new = 1.0 / rule.expect(m2.sc_fisher)
        step = max(np.max(np.abs(A_rg_new - A_rg)), abs(A_sc_new - A_sc), abs(z_new - z))
        A_rg, A_sc, z = A_rg_new, A_sc_new, z_new
        if step <= 1e-13:
            break
    else:
        raise SolverNonconvergence("joint fixed point did not converge", {"step": step})

    s = rule.norms(A_rg)
    b = solve_b(s, A_sc, z)
    m = _JointMoments(s, A_sc, z, b)
    residuals = {
        "fisher_rg": float(np.max(np.abs(A_rg @ rule.outer(m.u2w) - np.eye(k)))),
        "fisher_sc": A_sc * rule.expect(m.sc_fisher) - 1.0,
        "centering": rule.expect(m.scw) - z * rule.expect(m.ww),
        "bias": b - rule.expect(m.excess) / (r * r),
    }
    A_rg_out = float(A_rg[0, 0]) if k == 1 else A_rg

    def func(obs, _A=A_rg, _t=A_sc, _z=z, _b=b):
        x, u = _split_obs(obs, k)
        rg = (x @ _A.T) * u[:, None]
        sc = _t * (u * u - 1.0 - _z)
        N = np.sqrt(np.sum(rg * rg, axis=1) + sc * sc)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(N > 0, np.minimum(1.0, _b / N), 1.0)
        return np.column_stack([rg * w[:, None], sc * w])

    return InfluenceCurve(model, nbd, A=A_rg_out, center=z, clip_lower=-math.inf,
                          clip_upper=b, bias=b, variance=rule.expect(m.norm2), func=func,
                          residuals=residuals,
                          extras={"A_sc": A_sc, "z": z, "iterations": it + 1, "target": "joint"})
