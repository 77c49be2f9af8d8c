import logging
import math

import numpy as np
import pandas as pd
import pytest

from espy import distributions as dists
from espy import risk
from espy import volatility as vol
from espy.data import ReturnSeries, overlapping_h_returns

logging.basicConfig(level="DEBUG")


def _series(values, horizon=1):
    return ReturnSeries(pd.RangeIndex(len(values)), np.asarray(values, dtype=float), horizon)


def test_empirical_var_es():

    window = _series(np.arange(1, 81) / -100.0)

    var, es = risk.empirical_var_es(window, 0.025)

    # k = 2: the two smallest returns are -0.80 and -0.79
    assert var == pytest.approx(0.79)
    assert es == pytest.approx(0.795)

    var, es = risk.empirical_var_es(window, 0.025, portfolio_value=1000.0)
    assert var == pytest.approx(790.0)


def test_empirical_needs_a_tail_point():

    with pytest.raises(risk.RiskError):
        risk.empirical_var_es(_series(np.linspace(-1, 1, 39)), 0.025)

    var, es = risk.empirical_var_es(_series(np.linspace(-1, 1, 40)), 0.025)
    assert var == es == pytest.approx(1.0)


def test_delta_normal():

    values = np.random.default_rng(1).normal(0.001, 0.02, 500)
    mu, sigma = np.mean(values), np.std(values, ddof=1)

    var, es = risk.delta_normal_var_es(_series(values), 0.025)

    assert var == pytest.approx(-(mu - 1.959964 * sigma), rel=1e-5)
    assert es == pytest.approx(-(mu - 2.337803 * sigma), rel=1e-5)
    assert es > var

    with pytest.raises(risk.RiskError):
        risk.delta_normal_var_es(_series(np.full(100, 0.01)), 0.025)

    with pytest.raises(risk.RiskError):
        risk.delta_normal_var_es(_series(np.full(100, 0.1)), 0.025)

    with pytest.raises(risk.RiskError):
        risk.delta_normal_var_es(_series(values[:20]), 0.025)


def test_parametric_var_es_normal():

    returns = _series(np.random.default_rng(2).normal(0.0, 0.01, 300))
    model = vol.calibrate_mle(vol.RISKMETRICS, returns, dists.NORMAL)
    sigma = math.sqrt(model.next_sigma2)

    var, es = risk.parametric_var_es(model, 0.025)

    assert var == pytest.approx(1.959964 * sigma, rel=1e-5)
    assert es == pytest.approx(2.337803 * sigma, rel=1e-5)


def test_bn_augmented_window():

    cfg = risk.ForecastConfig(alpha=0.025, horizon_days=3, window_len=6)
    hist = _series([0.01, 0.02, 0.03, 0.04, 0.05])

    window = risk.bn_augmented_window(hist, -0.5, cfg)

    assert window.horizon_days == 3
    assert window.values.tolist() == pytest.approx([0.06, 0.09, 0.12, -0.41])

    with pytest.raises(risk.RiskError):
        risk.bn_augmented_window(hist[:4], -0.5, cfg)

    with pytest.raises(risk.RiskError):
        risk.bn_augmented_window(hist, float("nan"), cfg)


def test_bn_augmented_equals_hs_on_same_window():

    daily = np.random.default_rng(4).normal(0.0, 0.01, 300)
    cfg = risk.ForecastConfig(alpha=0.025, horizon_days=10, window_len=300)

    augmented = risk.BnAugmented("pc_stable").predict(_series(daily[:-1]), cfg, forecast_return=daily[-1])
    historical = risk.HistoricalSimulation().predict(_series(daily), cfg)

    assert augmented.var == pytest.approx(historical.var, abs=1e-15)
    assert augmented.es == pytest.approx(historical.es, abs=1e-15)

    with pytest.raises(risk.RiskError):
        risk.BnAugmented("mmhc").predict(_series(daily), cfg)


def test_estimators_roll_h_day_returns():

    daily = np.random.default_rng(5).normal(0.0, 0.01, 400)
    cfg = risk.ForecastConfig(alpha=0.025, horizon_days=10, window_len=400)

    prediction = risk.HistoricalSimulation().predict(_series(daily), cfg)
    expected = risk.empirical_var_es(overlapping_h_returns(_series(daily), 10), 0.025)

    assert (prediction.var, prediction.es) == pytest.approx(expected)
    assert isinstance(prediction.law, risk.EmpiricalLaw)
    assert prediction.law.size == 391

    normal = risk.DeltaNormal().predict(_series(daily), cfg)
    assert isinstance(normal.law, risk.ParametricLaw)
    assert normal.law.cdf(-normal.var) == pytest.approx(0.025, abs=1e-9)


def test_parametric_estimator_warm_starts_per_metric():

    daily, _ = vol.simulate(vol.ModelParams(vol.GARCH, omega=2e-6, alpha=0.08, beta=0.90), 300, seed=6)
    cfg = risk.ForecastConfig(alpha=0.025, horizon_days=10, window_len=300)
    estimator = risk.Parametric(vol.GARCH, dists.NORMAL, restarts=1, max_iter=2000, seed=3)

    prediction = estimator.predict(_series(daily), cfg, risk.ES)

    assert estimator.model_id == "garch_normal"
    assert set(estimator._previous) == {risk.ES}
    assert prediction.es > prediction.var > 0
    assert prediction.law.cdf(-prediction.var) == pytest.approx(0.025, abs=1e-8)


def test_empirical_law():

    law = risk.EmpiricalLaw.from_window(np.array([3.0, 1.0, 2.0, 5.0, 4.0]))

    assert law.is_complete
    assert law.cdf(0.0) == 0.0
    assert law.cdf(1.0) == 0.0
    assert law.cdf(3.0) == pytest.approx(0.5)
    assert law.cdf(9.0) == 1.0

    compact = law.compact(0.1)
    assert compact.tail.tolist() == [1.0, 2.0]
    assert not compact.is_complete
    assert compact.cdf(1.5) == pytest.approx(law.cdf(1.5))

    with pytest.raises(risk.RiskError):
        compact.cdf(4.0)

    draws = compact.sample(10000, (1, 2))
    assert set(np.unique(draws[np.isfinite(draws)])) <= {1.0, 2.0}
    assert np.mean(np.isinf(draws)) == pytest.approx(0.6, abs=0.03)

    full = law.sample(10000, (1, 2))
    assert np.array_equal(np.isinf(draws), full > 2.0)


def test_forecast_record_breaches():

    cfg = risk.ForecastConfig()
    law = risk.ParametricLaw(0.0, 0.05, dists.NormalDistribution())
    prediction = risk.Prediction(0.08, 0.10, law)
    date = pd.Timestamp("2021-03-01")

    record = risk.make_forecast_record(date, "hs", risk.ES, prediction, -0.09, cfg, pit=0.04)
    assert record.var_breach
    assert not record.es_breach

    record = risk.make_forecast_record(date, "hs", risk.ES, prediction, -0.10, cfg)
    assert record.var_breach
    assert not record.es_breach

    record = risk.make_forecast_record(date, "hs", risk.ES, prediction, -0.12, cfg)
    assert record.es_breach

    scaled = risk.ForecastConfig(portfolio_value=100.0)
    record = risk.make_forecast_record(date, "hs", risk.ES, risk.Prediction(8.0, 10.0, law), -0.09, scaled)
    assert record.var_breach and not record.es_breach

    with pytest.raises(risk.RiskError):
        risk.make_forecast_record(date, "hs", risk.ES, risk.Prediction(-0.01, 0.1, law), 0.0, cfg)


def test_parametric_law():

    law = risk.ParametricLaw(0.01, 0.02, dists.NormalDistribution())

    assert law.cdf(0.01) == pytest.approx(0.5)
    assert law.cdf(0.01 - 0.02 * 1.959964) == pytest.approx(0.025, abs=1e-7)
    assert np.mean(law.sample(100000, 5)) == pytest.approx(0.01, abs=5e-4)
    assert law.compact(0.025) is law


def test_forecast_config_validation():

    with pytest.raises(risk.RiskError):
        risk.ForecastConfig(alpha=0.6).validate()

    with pytest.raises(risk.RiskError):
        risk.ForecastConfig(horizon_days=0).validate()

    with pytest.raises(risk.RiskError):
        risk.ForecastConfig(horizon_days=10, window_len=10).validate()

    risk.ForecastConfig().validate()

