"""Neighborhood and influence-curve containers shared by the solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

_KINDS = ("c", "v", "h")
_ALPHAS = (1, 2, math.inf)


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Shrinking neighborhood of type ``kind`` with radius ``radius``.

    ``alpha`` is the conditional exponent used by regression neighborhoods
    (1, 2 or ``math.inf``); other models ignore it.
    """

    kind: str = "c"
    radius: float = 0.5
    alpha: float = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if not self.radius >= 0:
            raise ValueError("radius must be nonnegative")
        if self.alpha not in _ALPHAS:
            raise ValueError("alpha must be 1, 2 or inf")


@dataclass(eq=False)
class InfluenceCurve:
    """An influence curve together with its defining constants.

    ``A`` is the standardizing matrix (a float in one dimension), ``center``
    the centering constant, ``clip_lower``/``clip_upper`` the clipping
    constants (``inf`` when unclipped), ``bias`` the bias functional matching
    the neighborhood type and ``variance`` is ``E|eta|^2``.  ``residuals``
    records the defining equations evaluated at the returned solution.
    """

    model: Any
    nbd: NeighborhoodSpec
    A: Any
    center: Any
    clip_lower: float
    clip_upper: float
    bias: float
    variance: float
    func: Callable = field(repr=False)
    residuals: Mapping[str, float] = field(default_factory=dict)
    extras: Mapping[str, Any] = field(default_factory=dict)

    def __call__(self, obs):
        return self.func(obs)

    @property
    def radius(self):
        return self.nbd.radius

    @property
    def max_residual(self):
        return max((abs(v) for v in self.residuals.values()), default=0.0)

    def max_mse(self, r=None):
        """Maximal asymptotic MSE over the neighborhood of radius ``r``."""
        r = self.nbd.radius if r is None else r
        if r == 0:
            return self.variance
        if math.isinf(r) or math.isinf(self.bias):
            return math.inf
        return self.variance + r * r * self.bias**2


def as_matrix(A, k):
    """Return ``A`` as a ``k x k`` array (scalars become multiples of the identity)."""
    A = np.asarray(A, dtype=float)
    return A * np.eye(k) if A.ndim == 0 else A
