import logging

import numpy as np
import pandas as pd
import pytest

from espy import data

logging.basicConfig(level="DEBUG")


def _write(tmp_path, text):
    path = tmp_path / "panel.csv"
    path.write_text(text)
    return path


def test_load_and_align(tmp_path):

    path = _write(tmp_path,
                  "date,close,x\n"
                  "2020-01-01,,1\n"
                  "2020-01-02,100,\n"
                  "2020-01-03,,3\n"
                  "2020-01-06,101,\n"
                  "2020-01-07,,5\n")

    panel = data.load_panel(path, data.PanelSchema("close"))

    assert list(panel.dates) == [pd.Timestamp("2020-01-02"), pd.Timestamp("2020-01-06")]
    assert panel.prices.tolist() == [100.0, 101.0]
    assert panel.frame["x"].tolist() == [1.0, 3.0]
    assert panel.columns == ["close", "x"]


def test_load_rejects_bad_input(tmp_path):

    with pytest.raises(data.DataError):
        data.load_panel(tmp_path / "missing.csv", data.PanelSchema("close"))

    path = _write(tmp_path, "date,close\n2020-01-01,100\n2020-01-02,abc\n")
    with pytest.raises(data.DataError) as e:
        data.load_panel(path, data.PanelSchema("close"))
    assert e.value.column == "close"
    assert e.value.row == 1

    path = _write(tmp_path, "date,close\n2020-01-01,100\n,101\n2020-01-03,102\n")
    with pytest.raises(data.DataError) as e:
        data.load_panel(path, data.PanelSchema("close"))
    assert e.value.column == "date"
    assert e.value.row == 1

    path = _write(tmp_path, "date,close\n2020-01-01,100\n2020-01-01,101\n")
    with pytest.raises(data.DataError):
        data.load_panel(path, data.PanelSchema("close"))

    path = _write(tmp_path, "date,price\n2020-01-01,100\n")
    with pytest.raises(data.DataError) as e:
        data.load_panel(path, data.PanelSchema("close"))
    assert e.value.column == "close"


def test_load_sorts_dates(tmp_path):

    path = _write(tmp_path, "date,close\n2020-01-03,102\n2020-01-01,100\n2020-01-02,101\n")
    panel = data.load_panel(path, data.PanelSchema("close"))

    assert panel.prices.tolist() == [100.0, 101.0, 102.0]


def test_carry_forward_fill():

    frame = pd.DataFrame({"close": np.arange(1.0, 11.0),
                          "y": [np.nan, np.nan, np.nan, 4, np.nan, 6, 7, 8, 9, 10],
                          "z": [1.0, np.nan, 3, 4, 5, 6, 7, 8, 9, 10]},
                         index=pd.bdate_range("2020-01-01", periods=10))
    panel = data.AlignedPanel(frame, "close")

    filled = data.carry_forward_fill(panel, window_len=10, max_leading_fraction=0.1)

    assert filled.leading_gaps == {"close": 0, "y": 3, "z": 0}
    assert filled.flagged_columns == ("y",)
    assert filled.frame["y"].iloc[4] == 4.0
    assert filled.frame["z"].iloc[1] == 1.0
    assert filled.frame["y"].iloc[:3].isna().all()

    with pytest.raises(data.DataError):
        data.carry_forward_fill(data.AlignedPanel(frame.assign(w=np.nan), "close"))


def test_log_returns():

    returns = data.log_returns([100.0, 110.0, 121.0])

    assert returns.horizon_days == 1
    assert np.allclose(returns.values, [np.log(1.1), np.log(1.1)])
    assert len(returns.dates) == 2

    with pytest.raises(data.DataError) as e:
        data.log_returns([100.0, 0.0, 5.0])
    assert e.value.row == 1

    with pytest.raises(data.DataError):
        data.log_returns([100.0])


def test_overlapping_h_returns():

    daily = data.ReturnSeries(pd.RangeIndex(5), np.array([1.0, 2.0, 3.0, 4.0, 5.0]))

    two_day = data.overlapping_h_returns(daily, 2)

    assert two_day.horizon_days == 2
    assert two_day.values.tolist() == [3.0, 5.0, 7.0, 9.0]
    assert list(two_day.dates) == [1, 2, 3, 4]

    assert data.overlapping_h_returns(daily, 5).values.tolist() == [15.0]

    with pytest.raises(data.DataError):
        data.overlapping_h_returns(daily, 6)

    with pytest.raises(data.DataError):
        data.overlapping_h_returns(two_day, 2)


def test_return_series_rejects_non_finite():

    with pytest.raises(data.DataError):
        data.ReturnSeries(pd.RangeIndex(2), np.array([0.1, np.nan]))


def test_descriptive_stats():

    values = np.random.default_rng(7).standard_normal(20000)
    stats = data.descriptive_stats(data.ReturnSeries(pd.RangeIndex(len(values)), values))

    assert stats.n_obs == 20000
    assert abs(stats.mean) < 0.05
    assert abs(stats.std_dev - 1.0) < 0.05
    assert abs(stats.skewness) < 0.1
    assert abs(stats.kurtosis - 3.0) < 0.2
    assert stats.min < stats.mean < stats.max
    assert set(stats.as_dict()) == {"mean", "std_dev", "min", "max", "skewness", "kurtosis", "n_obs"}

    with pytest.raises(data.DataError):
        data.descriptive_stats(data.ReturnSeries(pd.RangeIndex(5), np.zeros(5)))

    with pytest.raises(data.DataError):
        data.descriptive_stats(data.ReturnSeries(pd.RangeIndex(50), np.full(50, 0.01)))
