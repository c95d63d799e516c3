"""Ideal Gaussian models, their scores and regressor distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special

from ._curves import InfluenceCurve, NeighborhoodSpec
from .dist_kernel import (
    Phi,
    gauss_excess,
    gauss_legendre_rule,
    phi,
    square_partial_moment,
    square_upper_excess,
)
from .exceptions import SingularDesign

_COND_LIMIT = 1e12


# -- regressor distributions -----------------------------------------------------


class DesignRule:
    """Weighted nodes representing a regressor law for summation.

    ``kind == "atoms"`` stores full regressor vectors ``X`` (m x k).
    ``kind == "radial"`` stores radii ``rho`` of a spherical law; it is only
    valid for standardizing matrices that are multiples of the identity.
    """

    def __init__(self, kind, weights, X=None, rho=None, k=None):
        self.kind = kind
        self.weights = np.asarray(weights, dtype=float)
        self.X = None if X is None else np.asarray(X, dtype=float)
        self.rho = None if rho is None else np.asarray(rho, dtype=float)
        self.k = k if k is not None else self.X.shape[1]

    def __len__(self):
        return self.weights.size

    def norms(self, A):
        """``|A x|`` at every node."""
        A = np.asarray(A, dtype=float)
        if self.kind == "radial":
            a = float(A) if A.ndim == 0 else float(A[0, 0])
            return abs(a) * self.rho
        if A.ndim == 0:
            return abs(float(A)) * np.linalg.norm(self.X, axis=1)
        return np.linalg.norm(self.X @ A.T, axis=1)

    def expect(self, vals):
        return float(self.weights @ np.asarray(vals, dtype=float))

    def outer(self, vals):
        """``E x x' f(x)`` given ``f`` evaluated at the nodes."""
        vals = np.asarray(vals, dtype=float)
        if self.kind == "radial":
            return float(self.weights @ (self.rho**2 * vals)) / self.k * np.eye(self.k)
        wx = self.X * (self.weights * vals)[:, None]
        return wx.T @ self.X


def _radial_rule(k, n=24):
    # chi_k law on a window around its mode, panel width 1
    mode = math.sqrt(max(k - 1, 0))
    lo = max(0.0, math.floor(mode - 14.0))
    hi = math.ceil(mode + 14.0)
    rho, w = gauss_legendre_rule(np.arange(lo, hi + 1.0), n)
    logpdf = ((k - 1) * np.log(rho) - 0.5 * rho**2
              - (0.5 * k - 1) * math.log(2.0) - special.gammaln(0.5 * k))
    return rho, w * np.exp(logpdf)


def _normal_atoms(n=24):
    x, w = gauss_legendre_rule(np.arange(-12.0, 13.0), n)
    return x[:, None], w * phi(x)


@dataclass(frozen=True, eq=False)
class RegressorDist:
    """Distribution ``K`` of the regressors.

    Build instances through :meth:`standard_normal`, :meth:`two_point` or
    :meth:`discrete`.
    """

    kind: str
    k: int
    atoms: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def standard_normal(cls, k=1):
        if k < 1:
            raise ValueError("dimension must be positive")
        return cls("standard_normal", int(k))

    @classmethod
    def two_point(cls, x1, x2, p):
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        X = np.atleast_2d(np.vstack([np.atleast_1d(x1), np.atleast_1d(x2)]).astype(float))
        return cls._build("two_point", X, np.array([p, 1.0 - p]))

    @classmethod
    def discrete(cls, atoms, weights=None):
        X = np.asarray(atoms, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if weights is None:
            weights = np.full(X.shape[0], 1.0 / X.shape[0])
        return cls._build("discrete", X, np.asarray(weights, dtype=float))

    @classmethod
    def point_mass(cls, x):
        return cls.discrete(np.atleast_2d(np.asarray(x, dtype=float)), [1.0])

    @classmethod
    def _build(cls, kind, X, w):
        if w.shape != (X.shape[0],) or np.any(w < 0):
            raise ValueError("weights must be nonnegative, one per atom")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")
        return cls(kind, X.shape[1], X, w)

    @property
    def has_atoms(self):
        return self.atoms is not None

    @cached_property
    def mean(self):
        if not self.has_atoms:
            return np.zeros(self.k)
        return self.weights @ self.atoms

    @cached_property
    def second_moment(self):
        """``E x x'``."""
        if not self.has_atoms:
            return np.eye(self.k)
        return (self.atoms * self.weights[:, None]).T @ self.atoms

    @cached_property
    def mean_norm(self):
        """``E |x|``."""
        if not self.has_atoms:
            return math.sqrt(2.0) * math.exp(special.gammaln((self.k + 1) / 2) - special.gammaln(self.k / 2))
        return float(self.weights @ np.linalg.norm(self.atoms, axis=1))

    @cached_property
    def symmetric(self):
        """Whether ``x`` and ``-x`` have the same law."""
        if not self.has_atoms:
            return True
        pairs = {}
        for x, w in zip(map(tuple, np.round(self.atoms, 12)), self.weights):
            pairs[x] = pairs.get(x, 0.0) + w
        return all(abs(w - pairs.get(tuple(-np.array(x) + 0.0), 0.0)) < 1e-12
                   for x, w in pairs.items())

    @property
    def spherical(self):
        return self.kind == "standard_normal" or (self.k == 1 and self.symmetric)

    def rule(self, prefer_atoms=False):
        """A :class:`DesignRule` for exact (atoms) or Gauss-Legendre summation."""
        if self.has_atoms:
            return DesignRule("atoms", self.weights, X=self.atoms)
        if prefer_atoms:
            if self.k != 1:
                raise ValueError("atom discretization is only available for k = 1")
            X, w = _normal_atoms()
            return DesignRule("atoms", w, X=X)
        rho, w = _radial_rule(self.k)
        return DesignRule("radial", w, rho=rho, k=self.k)

    def check_design(self):
        S = self.second_moment
        ev = np.linalg.eigvalsh(S)
        if ev[0] <= 0 or ev[-1] / ev[0] > _COND_LIMIT:
            raise SingularDesign("E xx' is numerically singular")
        return S

    def sample(self, n, rng):
        if self.has_atoms:
            idx = rng.choice(self.weights.size, size=n, p=self.weights)
            return self.atoms[idx]
        return rng.standard_normal((n, self.k))


# -- models ---------------------------------------------------------------------

_VARIANTS = ("location", "scale", "regression", "regression_scale", "regression_intercept")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Ideal model with standard normal errors.

    ``variant`` is one of ``location``, ``scale``, ``regression``,
    ``regression_scale`` and ``regression_intercept``.
    """

    variant: str
    k: int = 1
    regressor: RegressorDist | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown model variant {self.variant!r}")
        if self.k < 1:
            raise ValueError("dimension must be positive")
        if self.variant.startswith("regression"):
            if self.regressor is None:
                raise ValueError("regression models need a regressor distribution")
            if self.regressor.k != self.k:
                raise ValueError("regressor dimension does not match k")
            self.regressor.check_design()
        if self.variant == "regression_intercept" and np.max(np.abs(self.regressor.mean)) > 1e-10:
            raise ValueError("the intercept model requires centered regressors")

    @property
    def dim(self):
        """Dimension of the parameter of interest's score."""
        return {"scale": 1, "regression_scale": self.k + 1}.get(self.variant, self.k)

    @property
    def name(self):
        return self.variant

    def __repr__(self):
        extra = f", K={self.regressor.kind}" if self.regressor is not None else ""
        return f"{type(self).__name__}({self.variant}, k={self.k}{extra})"


def Location(k=1):
    return ModelSpec("location", k)


def Scale():
    return ModelSpec("scale", 1)


def Regression(K):
    return ModelSpec("regression", K.k, K)


def RegressionScale(K):
    return ModelSpec("regression_scale", K.k, K)


def RegressionIntercept(K):
    return ModelSpec("regression_intercept", K.k, K)


# -- one-dimensional score laws -------------------------------------------------


class GaussLaw:
    """Law of ``a U`` where ``U ~ N(0, 1)`` and ``a >= 0`` is discrete.

    Covers the location score (``a = 1``) and regression coordinates
    ``x_j u`` (``a = |x_j|``).
    """

    def __init__(self, scales=(1.0,), weights=(1.0,)):
        self.scales = np.abs(np.asarray(scales, dtype=float))
        self.weights = np.asarray(weights, dtype=float)
        self._pos = self.scales > 0
        self.inf, self.sup = -math.inf, math.inf

    def upper_excess(self, t):
        """``E (L - t)_+``."""
        a, w = self.scales[self._pos], self.weights[self._pos]
        zero = self.weights[~self._pos].sum() * max(-t, 0.0)
        return float(w @ (a * gauss_excess(t / a))) + zero

    def lower_excess(self, t):
        """``E (t - L)_+``."""
        return self.upper_excess(t) + t

    def abs_mean(self):
        return 2.0 * self.upper_excess(0.0)

    def clip_cross(self, lo, hi):
        """``E clip(L, lo, hi) L``."""
        a, w = self.scales[self._pos], self.weights[self._pos]
        return float(w @ (a * a * (Phi(hi / a) - Phi(lo / a))))

    def clip_square(self, lo, hi):
        """``E clip(L, lo, hi)^2``."""
        a, w = self.scales[self._pos], self.weights[self._pos]
        l, h = lo / a, hi / a
        with np.errstate(invalid="ignore"):
            low = np.where(np.isinf(l), 0.0, l * l * Phi(l) + l * phi(l))
            high = np.where(np.isinf(h), 0.0, h * h * Phi(-h) - h * phi(h))
        body = low + Phi(h) - Phi(l) + high
        zero = self.weights[~self._pos].sum() * min(max(0.0, lo), hi) ** 2
        return float(w @ (a * a * body)) + zero

    def clip_mean(self, lo, hi):
        base = 0.0 if lo <= self.inf else lo + self.upper_excess(lo)
        return base - self.upper_excess(hi)


class ShiftedChiSquareLaw:
    """Law of ``U^2 - 1`` (the Gaussian scale score)."""

    inf, sup = -1.0, math.inf

    def upper_excess(self, t):
        return square_upper_excess(1.0 + t)

    def lower_excess(self, t):
        return self.upper_excess(t) + t

    def abs_mean(self):
        return 2.0 * self.upper_excess(0.0)

    def _pieces(self, lo, hi):
        a, b = 1.0 + lo, 1.0 + hi
        p_lo = square_partial_moment(0, 0.0, a)
        first_lo = square_partial_moment(1, 0.0, a) - p_lo
        p_hi = square_partial_moment(0, b, math.inf)
        first_hi = square_partial_moment(1, b, math.inf) - p_hi
        m = [square_partial_moment(j, a, b) for j in range(3)]
        mid1 = m[1] - m[0]
        mid2 = m[2] - 2.0 * m[1] + m[0]
        return p_lo, first_lo, p_hi, first_hi, mid1, mid2

    def clip_cross(self, lo, hi):
        p_lo, f_lo, p_hi, f_hi, _, mid2 = self._pieces(lo, hi)
        return (lo * f_lo if p_lo else 0.0) + mid2 + (hi * f_hi if p_hi else 0.0)

    def clip_square(self, lo, hi):
        p_lo, _, p_hi, _, _, mid2 = self._pieces(lo, hi)
        return (lo * lo * p_lo if p_lo else 0.0) + mid2 + (hi * hi * p_hi if p_hi else 0.0)

    def clip_mean(self, lo, hi):
        base = 0.0 if lo <= self.inf else lo + self.upper_excess(lo)
        return base - self.upper_excess(hi)


# -- scores ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Score function ``Lambda`` of a model and its Fisher information.

    Observations are ``u`` arrays for location and scale models and
    ``(x, u)`` pairs for the regression variants.
    """

    model: ModelSpec
    fisher_info: np.ndarray

    def __call__(self, obs):
        return evaluate_score(self.model, obs)

    @property
    def k(self):
        return self.fisher_info.shape[0]

    def coordinate_laws(self):
        """Per-coordinate score laws, for models whose coordinates are one-dimensional."""
        m = self.model
        if m.variant == "location":
            return [GaussLaw() for _ in range(m.k)]
        if m.variant == "scale":
            return [ShiftedChiSquareLaw()]
        if m.variant == "regression":
            rule = m.regressor.rule(prefer_atoms=True) if m.regressor.has_atoms or m.k == 1 else None
            if rule is None:
                # coordinates of a standard normal design are standard normal
                X, w = _normal_atoms()
                return [GaussLaw(X[:, 0], w) for _ in range(m.k)]
            return [GaussLaw(rule.X[:, j], rule.weights) for j in range(m.k)]
        raise NotImplementedError(f"coordinate laws are not available for {m.variant}")


def _split_obs(obs, k):
    x, u = obs
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if k == 1 else x[None, :]
    return x, np.asarray(u, dtype=float)


def evaluate_score(model, obs):
    v = model.variant
    if v == "location":
        u = np.asarray(obs, dtype=float)
        return u
    if v == "scale":
        u = np.asarray(obs, dtype=float)
        return u * u - 1.0
    x, u = _split_obs(obs, model.k)
    rg = x * u[:, None]
    if v == "regression_scale":
        return np.column_stack([rg, u * u - 1.0])
    return rg


def scores(model: ModelSpec) -> ScoreVector:
    """Score vector and Fisher information of ``model``."""
    v = model.variant
    if v == "location":
        info = np.eye(model.k)
    elif v == "scale":
        info = np.array([[2.0]])
    else:
        S = model.regressor.check_design()
        info = S
        if v == "regression_scale":
            info = np.zeros((model.k + 1, model.k + 1))
            info[:-1, :-1] = S
            info[-1, -1] = 2.0
    return ScoreVector(model, info)


def classical_ic(model: ModelSpec) -> InfluenceCurve:
    """The unclipped influence curve ``I^{-1} Lambda``."""
    sv = scores(model)
    Ainv = np.linalg.inv(sv.fisher_info)
    if sv.k == 1:
        A = float(Ainv[0, 0])
    else:
        A = Ainv

    def func(obs, _A=Ainv, _model=model):
        lam = evaluate_score(_model, obs)
        if _A.shape[0] == 1:
            return float(_A[0, 0]) * lam
        return lam @ _A.T

    return InfluenceCurve(
        model=model,
        nbd=NeighborhoodSpec("c", 0.0),
        A=A,
        center=0.0 if model.variant != "scale" else 1.0,
        clip_lower=-math.inf,
        clip_upper=math.inf,
        bias=math.inf,
        variance=float(np.trace(Ainv)),
        func=func,
        extras={"classical": True},
    )
