import logging

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from espy import backtests as bt
from espy import distributions as dists
from espy import risk

logging.basicConfig(level="DEBUG")


def _records(realized, var, es, laws=None):
    dates = pd.bdate_range("2015-01-01", periods=len(realized))
    laws = laws or [None] * len(realized)

    return [risk.ForecastRecord(d, "hs", risk.ES, v, e, x, x < -v, x < -e, law=law)
            for d, x, v, e, law in zip(dates, realized, var, es, laws)]


def test_traffic_light_zones():

    assert bt.traffic_light(4, 250, 0.01).zone == bt.GREEN
    assert bt.traffic_light(5, 250, 0.01).zone == bt.YELLOW
    assert bt.traffic_light(9, 250, 0.01).zone == bt.YELLOW

    red = bt.traffic_light(10, 250, 0.01)
    assert red.zone == bt.RED
    assert red.decision == bt.REJECT

    assert bt.zone_boundaries(250, 0.01) == (5, 10)

    assert bt.traffic_light(3, 7286, 0.025).zone == bt.GREEN
    assert bt.traffic_light(0, 10, 0.025).decision == bt.PASS


def test_traffic_light_rejects_bad_counts():

    with pytest.raises(bt.BacktestError):
        bt.traffic_light(11, 10, 0.025)

    with pytest.raises(bt.BacktestError):
        bt.traffic_light(0, 0, 0.025)

    with pytest.raises(bt.BacktestError):
        bt.traffic_light(1, 10, 1.0)


@settings(deadline=None)
@given(n=st.integers(min_value=1, max_value=400), coverage=st.floats(min_value=0.005, max_value=0.2))
def test_traffic_light_zone_is_monotone(n, coverage):

    order = {bt.GREEN: 0, bt.YELLOW: 1, bt.RED: 2}
    zones = [order[bt.traffic_light(k, n, coverage).zone] for k in range(0, n + 1, max(1, n // 20))]

    assert zones == sorted(zones)


def test_z_cb_single_breach():

    statistic = bt.z_cb_statistic(np.array([0.01, -0.12, 0.02]), np.array([0.08, 0.08, 0.08]), np.array([0.10, 0.10, 0.10]))

    assert float(statistic) == pytest.approx(-0.2)


def test_z_cb_is_zero_when_losses_equal_es():

    es = np.array([0.10, 0.12, 0.09, 0.11])
    pnl = np.array([-0.10, 0.03, -0.09, 0.01])

    assert float(bt.z_cb_statistic(pnl, np.full(4, 0.05), es)) == 0.0


def test_z_cb_statistic_is_nan_without_breaches():

    pnl = np.array([[0.01, 0.02], [-0.2, 0.0]])
    statistic = bt.z_cb_statistic(pnl, np.array([0.1, 0.1]), np.array([0.12, 0.12]))

    assert np.isnan(statistic[0])
    assert statistic[1] == pytest.approx(1 - 0.2 / 0.12)

    with pytest.raises(bt.BacktestError):
        bt.z_cb_statistic(np.array([-0.2]), np.array([0.1]), np.array([0.0]))


def test_z_mb_statistic():

    pnl = np.array([0.01, -0.12, 0.02, 0.0])
    var = np.full(4, 0.08)
    es = np.full(4, 0.10)

    assert bt.z_mb_statistic(pnl, var, es, 0.25) == pytest.approx(0.02 + (-0.04 / 0.25) / 4)
    assert bt.z_mb_statistic(pnl, var, es, 0.25, as_printed=True) == pytest.approx(0.02 + (0.18 / 0.25) / 4)


def test_mc_pvalue():

    simulator = lambda n, seed: np.arange(n, dtype=float)

    assert bt.mc_pvalue(-1.0, simulator, 100, 0) == pytest.approx(1 / 101)
    assert bt.mc_pvalue(49.0, simulator, 100, 0) == pytest.approx(51 / 101)
    assert bt.mc_pvalue(1e9, simulator, 100, 0) == 1.0

    with_nan = lambda n, seed: np.where(np.arange(n) % 2 == 0, np.nan, 1.0)
    assert bt.mc_pvalue(1.0, with_nan, 100, 0) == pytest.approx(51 / 51)

    with pytest.raises(bt.BacktestError):
        bt.mc_pvalue(0.0, simulator, 99, 0)

    with pytest.raises(bt.BacktestError):
        bt.mc_pvalue(0.0, lambda n, seed: np.full(n, np.nan), 100, 0)


def test_null_pnl_is_reproducible():

    laws = [risk.ParametricLaw(0.0, 0.01, dists.NormalDistribution()) for _ in range(3)]

    first = bt.null_pnl(laws, 50, 7)
    second = bt.null_pnl(laws, 50, 7)

    assert first.shape == (50, 3)
    assert np.array_equal(first, second)
    assert not np.array_equal(first[:, 0], first[:, 1])

    with pytest.raises(bt.BacktestError):
        bt.null_pnl([None], 10, 1)


def _correct_model(n, sigma_forecast, seed):
    rng = np.random.default_rng(seed)
    law = risk.ParametricLaw(0.0, sigma_forecast, dists.NormalDistribution())
    realized = rng.normal(0.0, 0.01, n)

    var = sigma_forecast * 1.959964
    es = sigma_forecast * 2.337803

    return _records(realized, [var] * n, [es] * n, [law] * n)


def test_z_tests_pass_a_correct_model():

    records = _correct_model(1000, 0.01, 3)

    cb = bt.z_cb(records, trials=500, seed=1, significance=0.001)
    mb = bt.z_mb(records, 0.025, trials=500, seed=1, significance=0.001)

    assert cb.decision == bt.PASS
    assert mb.decision == bt.PASS
    assert cb.n_breaches == mb.n_breaches > 0


def test_z_mb_rejects_underestimated_risk():

    records = _correct_model(1000, 0.005, 3)

    outcome = bt.z_mb(records, 0.025, trials=500, seed=1)

    assert outcome.decision == bt.REJECT
    assert outcome.p_value < 0.01


def test_z_cb_cannot_perform_without_breaches():

    records = _records([0.01] * 60, [0.05] * 60, [0.06] * 60)

    outcome = bt.z_cb(records)

    assert outcome.decision == bt.CANNOT_PERFORM
    assert outcome.statistic is None
    assert outcome.n_breaches == 0


def test_monte_carlo_is_deterministic_in_the_seed():

    records = _correct_model(300, 0.008, 5)

    assert bt.z_mb(records, 0.025, trials=200, seed=4) == bt.z_mb(records, 0.025, trials=200, seed=4)


def test_pit_transform():

    laws = [risk.ParametricLaw(0.0, 1.0, dists.NormalDistribution())] * 2
    pit = bt.pit_transform(laws, [0.0, -1.959964])

    assert pit.values.tolist() == pytest.approx([0.5, 0.025], abs=1e-6)

    with pytest.raises(bt.BacktestError):
        bt.pit_transform(laws, [0.0])

    with pytest.raises(bt.BacktestError):
        bt.PitSeries(pd.RangeIndex(1), np.array([1.5]))


def test_cumulative_breaches():

    h = bt.cumulative_breaches(np.array([0.0, 0.0125, 0.025, 0.5]), 0.025)

    assert h.tolist() == pytest.approx([1.0, 0.5, 0.0, 0.0])


def test_du_escanciano_statistic_by_hand():

    u = np.array([0.0, 0.5, 0.0, 0.5])
    alpha = 0.025

    h = np.array([1.0, 0.0, 1.0, 0.0]) - alpha / 2
    gamma0 = np.dot(h, h) / 4
    gamma1 = np.dot(h[1:], h[:-1]) / 4

    assert bt.du_escanciano_statistic(u, alpha, 1) == pytest.approx(4 * (gamma1 / gamma0) ** 2)


def test_du_escanciano_uniform_pits_pass():

    u = np.random.default_rng(12).random(2000)
    pit = bt.PitSeries(pd.RangeIndex(len(u)), u)

    outcome = bt.du_escanciano(pit, 0.025, significance=0.001)
    assert outcome.decision == bt.PASS

    simulated = bt.du_escanciano(pit, 0.025, monte_carlo_trials=200, seed=3)
    assert simulated.statistic == outcome.statistic
    assert 0 < simulated.p_value <= 1


def test_du_escanciano_clustered_breaches_reject():

    u = np.full(500, 0.5)
    u[100:140] = 0.001
    pit = bt.PitSeries(pd.RangeIndex(len(u)), u)

    outcome = bt.du_escanciano(pit, 0.025)

    assert outcome.decision == bt.REJECT
    assert outcome.n_breaches == 40


def test_du_escanciano_edge_cases():

    pit = bt.PitSeries(pd.RangeIndex(100), np.full(100, 0.5))
    assert bt.du_escanciano(pit, 0.025).decision == bt.CANNOT_PERFORM

    with pytest.raises(bt.BacktestError):
        bt.du_escanciano(bt.PitSeries(pd.RangeIndex(10), np.full(10, 0.5)), 0.025)

    with pytest.raises(bt.BacktestError):
        bt.du_escanciano(pit, 0.025, n_lags=100)


def test_pit_series_requires_recorded_pits():

    records = _records([0.01] * 3, [0.05] * 3, [0.06] * 3)

    with pytest.raises(bt.BacktestError):
        bt.pit_series(records)


@pytest.mark.slow
def test_tests_hold_their_size_under_the_null():

    n, replications, trials = 500, 1000, 199
    law = risk.ParametricLaw(0.0, 0.01, dists.NormalDistribution())
    var, es = 0.01 * 1.959964, 0.01 * 2.337803

    rejections = {bt.Z_CB: 0, bt.Z_MB: 0, bt.DU_ESCANCIANO: 0}

    for replication in range(replications):
        realized = np.random.default_rng(10_000 + replication).normal(0.0, 0.01, n)
        records = _records(realized, [var] * n, [es] * n, [law] * n)

        outcomes = [
            bt.z_cb(records, trials, replication, significance=0.05),
            bt.z_mb(records, 0.025, trials, replication, significance=0.05),
            bt.du_escanciano(bt.pit_transform([law] * n, realized), 0.025, significance=0.05,
                             monte_carlo_trials=trials, seed=replication),
        ]

        for outcome in outcomes:
            rejections[outcome.test_id] += outcome.decision == bt.REJECT

    for test_id, count in rejections.items():
        assert 0.03 <= count / replications <= 0.07, test_id
