"""Estimators built from influence curves, sample generation and Monte Carlo risk."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._curves import NeighborhoodSpec
from .dist_kernel import Phi_inv
from .exceptions import ConfigError, EmptySample, NonfiniteUpdate, RadiusExceedsOne
from .ic_solver import solve, solve_huber
from .models import Location, Regression, RegressorDist, Scale

MAD_CONSTANT = Phi_inv(0.75)
WORST_CASE_SHIFT = 1e6


# -- samples ----------------------------------------------------------------------


@dataclass(frozen=True)
class Contamination:
    """Contaminating law ``H`` mixed in with probability ``r / sqrt(n)``.

    ``kind`` is ``point`` (mass at ``loc``), ``normal`` (``N(loc, scale^2)``) or
    ``grid`` (``points`` with ``weights``).  For regression the draw replaces
    the error term.
    """

    r: float
    kind: str = "point"
    loc: float = WORST_CASE_SHIFT
    scale: float = 1.0
    points: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if not self.r >= 0 or math.isinf(self.r):
            raise ConfigError("contamination radius must be finite and nonnegative")
        if self.kind not in ("point", "normal", "grid"):
            raise ConfigError(f"unknown contamination kind {self.kind!r}")
        if self.kind == "grid":
            if not self.points or len(self.points) != len(self.weights):
                raise ConfigError("grid contamination needs matching points and weights")
            if abs(sum(self.weights) - 1.0) > 1e-12 or min(self.weights) < 0:
                raise ConfigError("grid weights must be a probability vector")

    def draw(self, size, rng):
        if self.kind == "point":
            return np.full(size, float(self.loc))
        if self.kind == "normal":
            return self.loc + self.scale * rng.standard_normal(size)
        return rng.choice(np.asarray(self.points, dtype=float), size=size, p=np.asarray(self.weights))

    def describe(self):
        if self.kind == "point":
            return f"point({self.loc:g})"
        if self.kind == "normal":
            return f"normal({self.loc:g},{self.scale:g})"
        return f"grid({len(self.points)})"


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    replications: int = 100
    seed: int = 0
    contamination: Contamination | None = None
    start: str = "auto"
    theta: object = None

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.start not in ("auto", "median_mad", "least_squares"):
            raise ConfigError(f"unknown start estimator {self.start!r}")

    @property
    def radius(self):
        return 0.0 if self.contamination is None else self.contamination.r


@dataclass(frozen=True, eq=False)
class Sample:
    """Observations with the per-observation contamination flags.

    ``observations`` is an array for location and scale and an
    ``(X, y)`` pair for regression.
    """

    observations: object
    n: int
    flags: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def contaminated(self):
        return bool(self.flags.any())


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based Philox generator for replicate ``stream``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


def default_theta(model):
    if model.variant == "location":
        return np.zeros(model.k) if model.k > 1 else 0.0
    if model.variant == "scale":
        return 1.0
    if model.variant == "regression":
        return np.zeros(model.k)
    raise NotImplementedError(f"simulation is not available for {model.variant}")


def generate(model, config: SimConfig, replicate: int = 0) -> Sample:
    """Draw one sample from the contaminated model ``(1 - r/sqrt(n)) P + (r/sqrt(n)) H``."""
    n = config.n
    rng = rng_for(config.seed, replicate)
    theta = default_theta(model) if config.theta is None else config.theta
    cont = config.contamination
    eps = 0.0 if cont is None else cont.r / math.sqrt(n)
    if eps > 1.0:
        raise RadiusExceedsOne(f"r / sqrt(n) = {eps:g} exceeds one")
    flags = rng.random(n) < eps if eps < 1.0 else np.ones(n, dtype=bool)
    v = model.variant
    if v == "location" and model.k > 1:
        raise NotImplementedError("simulation covers one-dimensional location")
    if v == "regression":
        X = model.regressor.sample(n, rng)
        u = rng.standard_normal(n)
        if flags.any():
            u[flags] = cont.draw(int(flags.sum()), rng)
        obs = (X, X @ np.asarray(theta, dtype=float) + u)
    else:
        u = rng.standard_normal(n)
        obs = theta + u if v == "location" else theta * u
        if flags.any():
            obs[flags] = cont.draw(int(flags.sum()), rng)
    prov = {"kind": "contaminated" if eps > 0 else "ideal", "seed": config.seed, "replicate": replicate,
            "r": config.radius, "H": cont.describe() if cont else "none"}
    return Sample(obs, n, flags, prov)


# -- estimators -------------------------------------------------------------------


def mad_scale(x, center=None):
    x = np.asarray(x, dtype=float)
    center = np.median(x) if center is None else center
    return float(np.median(np.abs(x - center)) / MAD_CONSTANT)


def start_estimate(model, sample: Sample, start="auto"):
    """Default starts: median, MAD or least squares."""
    v = model.variant
    if v == "location":
        return float(np.median(sample.observations))
    if v == "scale":
        return mad_scale(sample.observations, 0.0)
    if v == "regression":
        X, y = sample.observations
        return np.linalg.lstsq(X, y, rcond=None)[0]
    raise NotImplementedError(f"no start estimator for {v}")


def one_step(ic, sample, start):
    """Start plus the sample mean of the influence curve at the start."""
    obs = getattr(sample, "observations", sample)
    v = ic.model.variant
    if v == "location":
        x = np.asarray(obs, dtype=float)
        if x.size == 0:
            raise EmptySample("empty sample")
        if not np.isfinite(start):
            raise NonfiniteUpdate("start must be finite")
        est = float(start) + float(np.mean(ic(x - start)))
    elif v == "scale":
        x = np.asarray(obs, dtype=float)
        if x.size == 0:
            raise EmptySample("empty sample")
        if not (np.isfinite(start) and start > 0):
            raise NonfiniteUpdate("scale start must be finite and positive")
        est = float(start) * (1.0 + float(np.mean(ic(x / start))))
    elif v == "regression":
        X, y = obs
        start = np.asarray(start, dtype=float)
        if not np.all(np.isfinite(start)):
            raise NonfiniteUpdate("start must be finite")
        vals = np.asarray(ic((X, y - X @ start)), dtype=float)
        est = start + vals.reshape(len(y), -1).mean(axis=0)
    else:
        raise NotImplementedError(f"one-step estimation is not available for {v}")
    if not np.all(np.isfinite(est)):
        raise NonfiniteUpdate("one-step update is not finite")
    return est


def m_estimate(psi, sample, tol: float = 1e-10) -> float:
    """Location M-estimate solving ``sum psi(x_i - theta) = 0``.

    Returns the midpoint of the root interval, so the sign score gives the
    sample median.
    """
    x = np.asarray(getattr(sample, "observations", sample), dtype=float).reshape(-1)
    if x.size == 0:
        raise EmptySample("empty sample")
    S = lambda t: float(np.sum(psi(x - t)))
    lo, hi = float(x.min()), float(x.max())
    if S(lo) < 0 or S(hi) > 0:
        warnings.warn("estimating equation has no root in the data range; using the minimizer of |sum psi|")
        grid = np.linspace(lo, hi, 2001)
        return float(grid[np.argmin([abs(S(t)) for t in grid])])

    def edge(pred):
        a, b = lo, hi
        while b - a > tol * max(1.0, abs(a), abs(b)):
            m = 0.5 * (a + b)
            if pred(m):
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    left = edge(lambda t: S(t) > 0)
    right = edge(lambda t: S(t) >= 0)
    return 0.5 * (left + right)


# -- Monte Carlo --------------------------------------------------------------------


@dataclass(frozen=True)
class MCRecord:
    nmse: float
    mcse: float
    reps: int
    seed: int
    n: int

    HEADER = "model,kind,r0,r_true,n,reps,seed,nmse,mcse"


def _threads():
    from .risk import _threads as t

    return t()


def monte_carlo_mse(ic, model, config: SimConfig) -> MCRecord:
    """Mean of ``n |estimate - theta|^2`` over replicates of the one-step estimator.

    Scale errors are relative, ``(sigma_hat - sigma) / sigma``.
    """
    theta = default_theta(model) if config.theta is None else config.theta

    def rep(j):
        s = generate(model, config, j)
        est = one_step(ic, s, start_estimate(model, s, config.start))
        err = np.asarray(est, dtype=float) - np.asarray(theta, dtype=float)
        if model.variant == "scale":
            err = err / theta
        return config.n * float(np.sum(err * err))

    workers = _threads()
    reps = range(config.replications)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = np.fromiter(pool.map(rep, reps), float, config.replications)
        # pool.map preserves order, so results stay deterministic
    else:
        vals = np.fromiter(map(rep, reps), float, config.replications)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.inf
    return MCRecord(float(vals.mean()), se, config.replications, config.seed, config.n)


# -- scikit-learn style estimators --------------------------------------------------


def _column(X):
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError("expected a single column of observations")
        X = X[:, 0]
    return X


class RobustLocation(BaseEstimator):
    """One-step location estimate with the minimax curve for radius ``radius``.

    Observations are standardized by the MAD before the step, so the curve
    is applied on the unit scale.
    """

    def __init__(self, radius=0.5, kind="c"):
        self.radius = radius
        self.kind = kind

    def fit(self, X, y=None):
        x = _column(X)
        self.ic_ = solve(Location(1), NeighborhoodSpec(self.kind, float(self.radius)))
        med = float(np.median(x))
        self.scale_ = mad_scale(x, med) or 1.0
        self.location_ = med + self.scale_ * float(np.mean(self.ic_((x - med) / self.scale_)))
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        """Influence values of the observations at the fitted location."""
        check_is_fitted(self, "location_")
        return self.ic_((_column(X) - self.location_) / self.scale_)[:, None]


class HuberLocation(BaseEstimator):
    """Huber M-estimate of location for contamination fraction ``s``."""

    def __init__(self, s=0.05):
        self.s = s

    def fit(self, X, y=None):
        x = _column(X)
        self.psi_ = solve_huber(float(self.s))
        self.scale_ = mad_scale(x) or 1.0
        self.location_ = m_estimate(lambda e: self.psi_(e / self.scale_), x)
        self.n_features_in_ = 1
        return self


class RobustScale(BaseEstimator):
    """One-step scale estimate from the MAD start, for centered observations."""

    def __init__(self, radius=0.5, kind="c"):
        self.radius = radius
        self.kind = kind

    def fit(self, X, y=None):
        x = _column(X)
        self.ic_ = solve(Scale(), NeighborhoodSpec(self.kind, float(self.radius)))
        start = mad_scale(x, 0.0)
        if start <= 0:
            raise ValueError("MAD start is zero; scale is not identifiable")
        self.scale_ = start * (1.0 + float(np.mean(self.ic_(x / start))))
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        return self.ic_(_column(X) / self.scale_)[:, None]


class RobustRegression(RegressorMixin, BaseEstimator):
    """One-step regression estimate from least squares.

    The curve is computed for the empirical design (each row an atom of
    equal weight) and errors are standardized by the MAD of the
    least-squares residuals.
    """

    def __init__(self, radius=0.5, alpha=1):
        self.radius = radius
        self.alpha = alpha

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        n, k = X.shape
        design = RegressorDist.discrete(X, np.full(n, 1.0 / n))
        model = Regression(design)
        self.ic_ = solve(model, NeighborhoodSpec("c", float(self.radius), self.alpha))
        start = np.linalg.lstsq(X, y, rcond=None)[0]
        res = y - X @ start
        self.scale_ = mad_scale(res, 0.0) or 1.0
        step = np.asarray(self.ic_((X, res / self.scale_)), dtype=float).reshape(n, k)
        self.coef_ = start + self.scale_ * step.mean(axis=0)
        self.n_features_in_ = k
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        return X @ self.coef_


class InfluenceCurveTransformer(TransformerMixin, BaseEstimator):
    """Evaluate the minimax location or scale curve on standardized observations."""

    def __init__(self, model="location", kind="c", radius=0.5):
        self.model = model
        self.kind = kind
        self.radius = radius

    def fit(self, X=None, y=None):
        models = {"location": Location(1), "scale": Scale()}
        if self.model not in models:
            raise ValueError("model must be 'location' or 'scale'")
        self.ic_ = solve(models[self.model], NeighborhoodSpec(self.kind, float(self.radius)))
        if X is not None:
            self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "ic_")
        return np.asarray(self.ic_(_column(X)))[:, None]
