import logging

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from espy import risk
from espy.scores import ScoreError, ScoreReport, rank_models, score, score_values

logging.basicConfig(level="DEBUG")


def _records(model_id, es, realized, metric_id=risk.ES):
    dates = pd.bdate_range("2018-01-01", periods=len(es))

    return [risk.ForecastRecord(d, model_id, metric_id, e, e, x, x < -e, x < -e)
            for d, e, x in zip(dates, es, realized)]


def test_single_forecast():

    report = score(_records("hs", [0.05], [-0.04]), risk.ES)

    assert report.mae == pytest.approx(0.01)
    assert report.rmse == pytest.approx(0.01)
    assert report.mape_pct == pytest.approx(25.0)
    assert report.n_obs == 1
    assert report.n_smape_substitutions == 0


def test_zero_realized_uses_symmetric_term():

    mae, rmse, mape, substitutions = score_values(np.array([0.05, 0.05]), np.array([0.0, -0.04]))

    assert substitutions == 1
    assert mape == pytest.approx(100 * (2.0 + 0.25) / 2)
    assert mae == pytest.approx((0.05 + 0.01) / 2)

    with pytest.raises(ScoreError):
        score_values(np.array([0.0]), np.array([0.0]))

    with pytest.raises(ScoreError):
        score_values(np.array([]), np.array([]))


def test_portfolio_value_scales_realized_returns():

    records = _records("hs", [5.0], [-0.04])

    report = score(records, risk.ES, portfolio_value=100.0)

    assert report.mae == pytest.approx(1.0)
    assert report.mape_pct == pytest.approx(25.0)


@given(st.lists(st.tuples(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=-1.0, max_value=-1e-6)),
                min_size=1, max_size=50))
def test_rmse_never_below_mae(pairs):

    forecasts, realized = map(np.array, zip(*pairs))
    mae, rmse, _, _ = score_values(forecasts, realized)

    assert rmse >= mae


def test_score_selects_one_metric():

    records = _records("hs", [0.05, 0.06], [-0.04, -0.07]) + _records("hs", [0.5], [-0.04], risk.SES)

    assert score(records, risk.ES).n_obs == 2
    assert score(records, risk.SES).n_obs == 1

    with pytest.raises(ScoreError):
        score(_records("hs", [0.05], [-0.04]) + _records("delta_normal", [0.05], [-0.04]), risk.ES)

    with pytest.raises(ScoreError):
        score(records, "var")


def test_rank_models():

    good = ScoreReport("b", risk.ES, 0.01, 0.02, 10.0, 100, 0)
    tied = ScoreReport("a", risk.ES, 0.01, 0.02, 10.0, 100, 0)
    bad = ScoreReport("c", risk.ES, 0.01, 0.03, 5.0, 100, 0)

    assert [r.model_id for r in rank_models([bad, good, tied])] == ["a", "b", "c"]

    with pytest.raises(ScoreError):
        rank_models([good])

    with pytest.raises(ScoreError):
        rank_models([good, ScoreReport("d", risk.SES, 0.01, 0.02, 10.0, 100, 0)])


def test_report_rejects_rmse_below_mae():

    with pytest.raises(ScoreError):
        ScoreReport("hs", risk.ES, 0.02, 0.01, 1.0, 10, 0)


def test_zero_forecast_of_zero_return_is_exact():

    mae, rmse, mape, substitutions = score_values(np.array([0.0, 0.05, 0.04]), np.array([0.0, -0.04, -0.02]))

    assert substitutions == 1
    assert mae == pytest.approx((0.0 + 0.01 + 0.02) / 3)
    assert mape == pytest.approx(100 * (0.0 + 0.25 + 1.0) / 3)

    with pytest.raises(ScoreError):
        score_values(np.zeros(3), np.zeros(3))
