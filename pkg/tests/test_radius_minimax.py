import math

import numpy as np
import pytest

from robicurve.models import Location, Regression, RegressorDist, Scale
from robicurve.radius_minimax import least_favorable_radius, minimax_radius_unknown
from robicurve.risk import rel_mse


def test_degenerate_interval():
    res = least_favorable_radius(Location(1), "c", 0.4, 0.4)
    assert res.r_star == 0.4 and res.inefficiency == 0.0


def test_invalid_interval():
    with pytest.raises(ValueError):
        least_favorable_radius(Location(1), "c", 0.5, 0.1)


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0, 2.0])
def test_location_three_fold_interval_bound(r):
    res = least_favorable_radius(Location(1), "c", r / 3, 3 * r)
    assert r / 3 <= res.r_star <= 3 * r
    assert 0 <= res.inefficiency <= 0.125
    assert rel_mse(Location(1), "c", res.r_star, res.r_star) == pytest.approx(1.0, abs=1e-12)


def test_saddle_property():
    lo, hi = 0.1, 0.9
    res = least_favorable_radius(Location(1), "c", lo, hi)
    grid = np.geomspace(lo, hi, 40)
    worst_star = max(rel_mse(Location(1), "c", res.r_star, r) for r in grid)
    for r0 in np.geomspace(lo, hi, 12):
        assert worst_star <= max(rel_mse(Location(1), "c", r0, r) for r in grid) + 1e-9


def test_nested_intervals_monotone():
    inner = least_favorable_radius(Location(1), "c", 0.2, 0.6)
    outer = least_favorable_radius(Location(1), "c", 0.1, 1.2)
    full = minimax_radius_unknown(Location(1), "c")
    assert inner.inefficiency <= outer.inefficiency + 1e-9
    assert outer.inefficiency <= full.inefficiency + 1e-9
    assert math.isfinite(full.r_star)


def test_high_dimension_min_bias_is_nearly_minimax():
    worst = max(rel_mse(Location(100), "c", math.inf, r) for r in np.geomspace(1e-3, 5.0, 30))
    assert worst <= 1.05
    assert least_favorable_radius(Location(100), "c", 0.0, 2.0).inefficiency <= 0.05


def test_scale_unknown_radius_contamination_level():
    res = minimax_radius_unknown(Scale(), "c")
    assert math.isfinite(res.r_star)
    assert res.r_star / math.sqrt(100) == pytest.approx(0.055, abs=0.02)


def test_regression_alpha2_matches_location():
    reg = least_favorable_radius(Regression(RegressorDist.standard_normal(1)), "c", 0.1, 0.9, alpha=2)
    loc = least_favorable_radius(Location(1), "c", 0.1, 0.9)
    assert reg.r_star == pytest.approx(loc.r_star, rel=1e-8)
    assert reg.inefficiency == pytest.approx(loc.inefficiency, abs=1e-10)
