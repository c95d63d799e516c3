import math

import numpy as np
import pytest

from robicurve.dist_kernel import gauss_expect
from robicurve.exceptions import SingularDesign
from robicurve.models import (
    Location,
    Regression,
    RegressionIntercept,
    RegressorDist,
    Scale,
    classical_ic,
    scores,
)


def test_location_scores():
    sv = scores(Location(1))
    u = np.linspace(-3, 3, 7)
    assert np.array_equal(sv(u), u)
    assert sv.fisher_info.tolist() == [[1.0]]


def test_scale_fisher_information_by_quadrature():
    sv = scores(Scale())
    assert sv.fisher_info[0, 0] == 2.0
    assert gauss_expect(lambda u: (u * u - 1) ** 2) == pytest.approx(2.0, abs=1e-10)


def test_regression_fisher_information():
    assert scores(Regression(RegressorDist.standard_normal(1))).fisher_info[0, 0] == pytest.approx(1.0)
    K = RegressorDist.two_point(1.0, -4.0, 0.8)
    assert scores(Regression(K)).fisher_info[0, 0] == pytest.approx(0.8 + 0.2 * 16)


def test_singular_design_rejected():
    K = RegressorDist.discrete([[1.0, 2.0], [2.0, 4.0]], [0.5, 0.5])
    with pytest.raises(SingularDesign):
        Regression(K)


def test_intercept_model_needs_centered_design():
    with pytest.raises(ValueError):
        RegressionIntercept(RegressorDist.two_point(1.0, 2.0, 0.5))
    RegressionIntercept(RegressorDist.two_point(1.0, -4.0, 0.8))


def test_classical_ic_examples():
    u = np.linspace(-4, 4, 33)
    assert np.allclose(classical_ic(Location(1))(u), u)
    assert np.allclose(classical_ic(Scale())(u), (u * u - 1) / 2)
    U = np.random.default_rng(0).normal(size=(10, 3))
    assert np.allclose(classical_ic(Location(3))(U), U)


@pytest.mark.parametrize("model, lam", [(Location(1), lambda u: u), (Scale(), lambda u: u * u - 1)])
def test_classical_ic_is_fisher_consistent(model, lam):
    ic = classical_ic(model)
    assert gauss_expect(lambda u: ic(u) * lam(u)) == pytest.approx(1.0, abs=1e-9)
    assert gauss_expect(ic) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("K", [RegressorDist.two_point(1.0, -1.0, 0.5),
                               RegressorDist.discrete([[-2.0], [-0.5], [0.5], [2.0]], [0.1, 0.4, 0.4, 0.1])])
def test_symmetric_design_kills_odd_moments(K):
    # E x u^2 w(x, u) = 0 for weights even in x
    w = lambda x, u: 1.0 / (1.0 + x * x) * np.minimum(1.0, 1.0 / np.abs(u))
    rule = K.rule()
    vals = [gauss_expect(lambda u: x * u * u * w(x, u), (-1.0, 1.0)) for x in rule.X[:, 0]]
    assert abs(float(np.dot(rule.weights, vals))) < 1e-12


def test_design_sampling_is_reproducible():
    K = RegressorDist.two_point(1.0, -4.0, 0.8)
    a = K.sample(100, np.random.default_rng(3))
    b = K.sample(100, np.random.default_rng(3))
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {1.0, -4.0}


def test_two_point_rejects_bad_probability():
    with pytest.raises(ValueError):
        RegressorDist.two_point(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        RegressorDist.discrete([[1.0], [2.0]], [0.7, 0.7])


def test_standard_normal_rule_moments():
    for k in (1, 2, 5):
        K = RegressorDist.standard_normal(k)
        rule = K.rule()
        assert rule.expect(np.ones(len(rule.weights))) == pytest.approx(1.0, abs=1e-12)
    assert RegressorDist.standard_normal(1).mean_norm == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
