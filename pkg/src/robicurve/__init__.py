"""Optimally robust influence curves for Gaussian models.

The package computes minimax influence curves over shrinking contamination,
total variation and Hellinger neighborhoods, their risks, radius-minimax
designs, semiparametric projections, maxmin tests and the resulting
estimators.
"""

__version__ = "0.1.0"

from ._curves import InfluenceCurve, NeighborhoodSpec
from .estimators import (
    HuberLocation,
    InfluenceCurveTransformer,
    RobustLocation,
    RobustRegression,
    RobustScale,
)
from .ic_solver import solve
from .models import Location, Regression, RegressionIntercept, RegressionScale, RegressorDist, Scale

__all__ = [
    "HuberLocation",
    "InfluenceCurve",
    "InfluenceCurveTransformer",
    "Location",
    "NeighborhoodSpec",
    "Regression",
    "RegressionIntercept",
    "RegressionScale",
    "RegressorDist",
    "RobustLocation",
    "RobustRegression",
    "RobustScale",
    "Scale",
    "solve",
    "__version__",
]
