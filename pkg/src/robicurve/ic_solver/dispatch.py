"""Pick the right solver for a (model, neighborhood) pair."""

from __future__ import annotations

from .._curves import NeighborhoodSpec
from .location import solve_location
from .regression import solve_regression_c1, solve_regression_intercept, solve_regression_scale
from .scale import solve_scale_c, solve_scale_v


def solve(model, nbd: NeighborhoodSpec, target: str = "joint"):
    """Minimax influence curve of ``model`` over the neighborhood ``nbd``."""
    v, kind, r = model.variant, nbd.kind, nbd.radius
    if v == "location" and kind == "c":
        return solve_location(model.k, r)
    if v == "location" and kind == "v":
        from ..sp_projection import robust_ic_v

        return robust_ic_v(model, r)
    if v == "scale" and kind == "c":
        return solve_scale_c(r)
    if v == "scale" and kind == "v":
        return solve_scale_v(r)
    if v == "regression" and kind == "c":
        return solve_regression_c1(r, model.regressor, alpha=nbd.alpha)
    if v == "regression_scale" and kind == "c":
        return solve_regression_scale(r, model.regressor, target=target)
    if v == "regression_intercept" and kind == "c":
        return solve_regression_intercept(r, model.regressor)
    raise NotImplementedError(f"no solver for {v} with neighborhood kind {kind!r}")
