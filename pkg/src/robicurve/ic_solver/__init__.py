"""Minimax influence curves for the Gaussian models."""

from .._curves import InfluenceCurve, NeighborhoodSpec
from .location import HuberPsi, clip_constant, solve_huber, solve_location
from .regression import (
    nonadaptivity_ratio,
    solve_regression_c1,
    solve_regression_intercept,
    solve_regression_scale,
)
from .scale import scale_c_crossover_radius, solve_scale_c, solve_scale_v
from .dispatch import solve

__all__ = [
    "HuberPsi",
    "InfluenceCurve",
    "NeighborhoodSpec",
    "clip_constant",
    "nonadaptivity_ratio",
    "scale_c_crossover_radius",
    "solve",
    "solve_huber",
    "solve_location",
    "solve_regression_c1",
    "solve_regression_intercept",
    "solve_regression_scale",
    "solve_scale_c",
    "solve_scale_v",
]
