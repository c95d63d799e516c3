import math
import warnings

import numpy as np
import pytest
from scipy import stats
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.utils.estimator_checks import check_estimators_dtypes, check_get_params_invariance

from robicurve import NeighborhoodSpec, solve
from robicurve.estimators import (
    Contamination,
    HuberLocation,
    InfluenceCurveTransformer,
    RobustLocation,
    RobustRegression,
    RobustScale,
    SimConfig,
    generate,
    m_estimate,
    mad_scale,
    monte_carlo_mse,
    one_step,
    rng_for,
)
from robicurve.exceptions import ConfigError, EmptySample, NonfiniteUpdate, RadiusExceedsOne
from robicurve.ic_solver import solve_huber, solve_location
from robicurve.models import Location, Regression, RegressorDist, Scale


def test_generate_ideal_is_normal():
    s = generate(Location(1), SimConfig(n=2000, seed=4))
    assert not s.contaminated
    assert stats.kstest(s.observations, "norm").statistic < 1.63 / math.sqrt(2000)
    assert s.provenance["kind"] == "ideal"


def test_generate_all_contaminated():
    cfg = SimConfig(n=100, seed=1, contamination=Contamination(10.0, "point", 7.0))
    s = generate(Location(1), cfg)
    assert s.flags.all() and np.all(s.observations == 7.0)
    with pytest.raises(RadiusExceedsOne):
        generate(Location(1), SimConfig(n=100, contamination=Contamination(10.5)))


def test_generate_contaminated_count():
    counts = [generate(Location(1), SimConfig(n=100, seed=9, contamination=Contamination(1.0, "point", 10.0)),
                       j).flags.sum() for j in range(400)]
    # Binomial(100, 0.1): mean 10, sd 3
    assert np.mean(counts) == pytest.approx(10, abs=3 * 3 / math.sqrt(400))


def test_generate_is_deterministic():
    cfg = SimConfig(n=50, seed=12, contamination=Contamination(2.0, "normal", 3.0, 5.0))
    a, b = generate(Location(1), cfg, 3), generate(Location(1), cfg, 3)
    assert np.array_equal(a.observations, b.observations) and np.array_equal(a.flags, b.flags)
    assert not np.array_equal(a.observations, generate(Location(1), cfg, 4).observations)
    assert rng_for(5, 1).random() == rng_for(5, 1).random()


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(n=0)
    with pytest.raises(ConfigError):
        SimConfig(replications=0)
    with pytest.raises(ConfigError):
        Contamination(0.5, "cauchy")
    with pytest.raises(ConfigError):
        Contamination(0.5, "grid", points=(1.0, 2.0), weights=(0.5, 0.6))


def test_one_step_examples():
    x = np.random.default_rng(0).normal(size=200)
    classical = solve_location(1, 0.0)
    assert one_step(classical, x, float(x.mean())) == pytest.approx(float(x.mean()), abs=1e-14)
    ic = solve_location(1, 0.5)
    assert one_step(ic, np.array([-2.0, 2.0]), 0.0) == 0.0
    with pytest.raises(NonfiniteUpdate):
        one_step(ic, x, math.nan)
    with pytest.raises(EmptySample):
        one_step(ic, np.array([]), 0.0)


def test_one_step_update_small_at_truth():
    ic = solve_location(1, 0.5)
    sd = math.sqrt(ic.variance)
    n, hits = 2000, 0
    for j in range(200):
        x = rng_for(3, j).standard_normal(n)
        hits += abs(one_step(ic, x, 0.0)) < 3 * sd / math.sqrt(n)
    assert hits >= 0.99 * 200


def test_location_equivariance():
    x = np.random.default_rng(1).standard_t(3, size=101)
    ic, psi = solve_location(1, 0.5), solve_huber(0.1)
    c = 3.75
    assert one_step(ic, x + c, float(np.median(x + c))) == pytest.approx(one_step(ic, x, float(np.median(x))) + c,
                                                                         abs=1e-12)
    assert m_estimate(psi, x + c) == pytest.approx(m_estimate(psi, x) + c, abs=1e-9)


def test_m_estimate_examples():
    x = np.random.default_rng(2).normal(size=51)
    assert m_estimate(lambda e: e, x) == pytest.approx(x.mean(), abs=1e-9)
    assert m_estimate(np.sign, x) == pytest.approx(np.median(x), abs=1e-9)
    even = np.array([1.0, 2.0, 5.0, 9.0])
    assert m_estimate(np.sign, even) == pytest.approx(3.5, abs=1e-8)
    y = np.concatenate([x, np.full(5, 50.0)])
    est = m_estimate(solve_huber(0.05), y)
    assert min(np.median(y), y.mean()) <= est <= max(np.median(y), y.mean())


def test_m_estimate_without_root_warns():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        m_estimate(lambda e: np.ones_like(e), np.array([0.0, 1.0]))
    assert rec


def test_mad_scale_is_consistent():
    x = rng_for(0).standard_normal(100_000)
    assert mad_scale(x) == pytest.approx(1.0, abs=0.02)


def test_monte_carlo_ideal_variance():
    ic = solve_location(1, 0.5)
    rec = monte_carlo_mse(ic, Location(1), SimConfig(n=10_000, replications=400, seed=8))
    assert abs(rec.nmse - ic.variance) <= 3 * rec.mcse + 0.03
    classical = monte_carlo_mse(solve_location(1, 0.0), Location(1), SimConfig(n=2000, replications=400, seed=8))
    assert abs(classical.nmse - 1.0) <= 3 * classical.mcse + 0.03


@pytest.mark.parametrize("model, ic", [(Location(1), solve_location(1, 0.5)),
                                       (Scale(), solve(Scale(), NeighborhoodSpec("c", 0.5)))])
def test_monte_carlo_contaminated_bound(model, ic):
    cfg = SimConfig(n=10_000, replications=300, seed=21, contamination=Contamination(0.5))
    rec = monte_carlo_mse(ic, model, cfg)
    assert rec.nmse <= ic.max_mse(0.5) + 3 * rec.mcse


def test_monte_carlo_threads_are_deterministic(monkeypatch):
    ic = solve_location(1, 0.5)
    cfg = SimConfig(n=200, replications=30, seed=2, contamination=Contamination(0.5))
    serial = monte_carlo_mse(ic, Location(1), cfg)
    monkeypatch.setenv("ROBICURVE_THREADS", "3")
    assert monte_carlo_mse(ic, Location(1), cfg) == serial


def test_regression_one_step():
    K = RegressorDist.standard_normal(1)
    cfg = SimConfig(n=400, seed=5, theta=np.array([2.0]))
    s = generate(Regression(K), cfg)
    est = one_step(solve(Regression(K), NeighborhoodSpec("c", 0.5)), s, np.array([1.9]))
    assert est[0] == pytest.approx(2.0, abs=0.3)


# -- scikit-learn interface -------------------------------------------------------


def test_robust_location_estimator():
    x = np.concatenate([rng_for(1).standard_normal(500) + 4.0, np.full(10, 1e6)])
    est = RobustLocation(0.5).fit(x)
    assert est.location_ == pytest.approx(4.0, abs=0.2)
    assert est.transform(x).shape == (510, 1)
    assert RobustLocation(0.5).fit(x[:, None]).location_ == est.location_
    with pytest.raises(ValueError):
        RobustLocation().fit(np.ones((3, 2)))


def test_huber_location_estimator():
    x = rng_for(2).standard_normal(300) - 1.0
    assert HuberLocation(0.05).fit(x).location_ == pytest.approx(-1.0, abs=0.2)


def test_robust_scale_estimator():
    x = 3.0 * rng_for(3).standard_normal(2000)
    assert RobustScale(0.5).fit(x).scale_ == pytest.approx(3.0, rel=0.08)


def test_robust_regression_estimator():
    rng = rng_for(4)
    X = rng.standard_normal((300, 2))
    y = X @ np.array([1.0, -2.0]) + rng.standard_normal(300)
    y[:15] += 20.0 * np.sign(X[:15, 0])  # outliers aligned with the first regressor
    est = RobustRegression(0.5).fit(X, y)
    ls = np.linalg.lstsq(X, y, rcond=None)[0]
    truth = np.array([1.0, -2.0])
    assert np.linalg.norm(est.coef_ - truth) < np.linalg.norm(ls - truth)
    assert np.allclose(est.coef_, truth, atol=0.3)
    assert est.predict(X).shape == (300,)


def test_transformer():
    t = InfluenceCurveTransformer("scale", "v", 0.5).fit()
    u = np.linspace(-3, 3, 9)
    assert np.allclose(t.transform(u)[:, 0], solve(Scale(), NeighborhoodSpec("v", 0.5))(u))
    with pytest.raises(ValueError):
        InfluenceCurveTransformer("cox").fit()


def test_not_fitted():
    with pytest.raises(NotFittedError):
        RobustLocation().transform([1.0])
    with pytest.raises(NotFittedError):
        RobustRegression().predict([[1.0]])


@pytest.mark.parametrize("est", [RobustLocation(0.3), HuberLocation(0.1), RobustScale(0.2), RobustRegression(0.4),
                                 InfluenceCurveTransformer()])
def test_sklearn_params(est):
    check_get_params_invariance(type(est).__name__, est)
    twin = clone(est)
    assert twin.get_params() == est.get_params()


def test_sklearn_dtypes():
    check_estimators_dtypes("RobustRegression", RobustRegression())
