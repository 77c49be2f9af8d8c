import collections
import dataclasses
import logging
import typing

import numpy as np
import pandas as pd

from .. import backtests as bt
from .. import risk
from ..data import (AlignedPanel, DescriptiveStats, ReturnSeries, carry_forward_fill, descriptive_stats,
                    load_panel, log_returns)
from ..dbn import DbnForecaster, DbnStructure
from ..errors import ModelError
from ..scores import ScoreReport, score
from ..stressed import StressedWindow, build_stressed_window, stressed_var_es
from .config import DBN_MODELS, DELTA_NORMAL, HS, ConfigError, StudyConfig, validate_config


logger = logging.getLogger("engine")


# failures confined to one (date, model, metric); anything else aborts
LEDGERED_ERRORS = (ModelError, FloatingPointError, np.linalg.LinAlgError)


@dataclasses.dataclass(frozen=True)
class Failure:
    date: typing.Optional[pd.Timestamp]
    model_id: str
    metric_id: typing.Optional[str]
    error_type: str
    message: str


class DataAccessAudit:
    """Hands out the history each forecast reads and records the latest panel
    row behind it.

    ``daily[k]`` is the return dated panel row ``k + 1`` and is built from
    price rows ``k`` and ``k + 1``.
    """

    def __init__(self) -> None:
        self.latest_read: typing.Dict[int, int] = {}
        self.violations: typing.List[typing.Tuple[int, int]] = []

    def returns(self, daily: ReturnSeries, position: int, start: int, stop: int) -> ReturnSeries:
        taken = np.arange(len(daily))[start:stop]
        if len(taken):
            self._note(position, int(taken[-1]) + 1)

        return daily[start:stop]

    def rows(self, panel: AlignedPanel, position: int, stop: int) -> AlignedPanel:
        """The panel cut after row ``stop - 1``; row numbers are unchanged."""
        truncated = panel.rows_before(stop)
        if len(truncated):
            self._note(position, len(truncated) - 1)

        return truncated

    def _note(self, position: int, last: int) -> None:
        self.latest_read[position] = max(self.latest_read.get(position, -1), last)

        if last >= position:
            self.violations.append((position, last))
            logger.warning(f"Forecast for row {position} read row {last}")


@dataclasses.dataclass
class StudyResult:
    config: StudyConfig
    panel: AlignedPanel
    records: typing.List[risk.ForecastRecord] = dataclasses.field(default_factory=list)
    outcomes: typing.Dict[typing.Tuple[str, str], typing.List[bt.BacktestOutcome]] = dataclasses.field(default_factory=dict)
    scores: typing.List[ScoreReport] = dataclasses.field(default_factory=list)
    failures: typing.List[Failure] = dataclasses.field(default_factory=list)
    stats: typing.Optional[DescriptiveStats] = None
    dates: typing.List[pd.Timestamp] = dataclasses.field(default_factory=list)
    stressed_windows: typing.List[StressedWindow] = dataclasses.field(default_factory=list)
    structures: typing.List[typing.Tuple[str, pd.Timestamp, DbnStructure]] = dataclasses.field(default_factory=list)
    audit: DataAccessAudit = dataclasses.field(default_factory=DataAccessAudit)

    def records_for(self, model_id: str, metric_id: str) -> typing.List[risk.ForecastRecord]:
        return [r for r in self.records if r.model_id == model_id and r.metric_id == metric_id]


def forecast_config(config: StudyConfig) -> risk.ForecastConfig:
    return risk.ForecastConfig(config.alpha, config.horizon_days, config.window_len, config.portfolio_value)


def build_estimators(config: StudyConfig) -> typing.Dict[str, risk.Estimator]:
    estimators = {}

    for model_id in config.models:
        if model_id == HS:
            estimators[model_id] = risk.HistoricalSimulation()
        elif model_id == DELTA_NORMAL:
            estimators[model_id] = risk.DeltaNormal()
        elif model_id in DBN_MODELS:
            estimators[model_id] = risk.BnAugmented(model_id[len("dbn_"):])
        else:
            family, kind = model_id.split("_", 1)
            estimators[model_id] = risk.Parametric(family, kind,
                                                   restarts=config.calibration.restarts,
                                                   max_iter=config.calibration.max_iter,
                                                   warm_start=config.calibration.warm_start,
                                                   seed=config.seed)

    return estimators


def build_forecasters(config: StudyConfig) -> typing.Dict[str, DbnForecaster]:
    return {
        model_id: DbnForecaster(model_id[len("dbn_"):],
                                config.panel.target_column,
                                config.window_len,
                                config.dbn.ci_alphas,
                                config.dbn.max_cond_size,
                                config.dbn.relearn_every)
        for model_id in config.models if model_id in DBN_MODELS
    }


def out_of_sample_positions(panel: AlignedPanel, config: StudyConfig) -> typing.List[int]:
    """Rows with two full windows of history before them, inside the
    configured date range."""
    first = 2 * config.window_len
    dates = panel.dates

    start = pd.Timestamp(config.start_date) if config.start_date else dates[0]
    end = pd.Timestamp(config.end_date) if config.end_date else dates[-1]

    positions = [p for p in range(first, len(dates)) if start <= dates[p] <= end]

    if not positions:
        raise ConfigError(f"No out-of-sample dates between {start.date()} and {end.date()} with "
                          f"{first} rows of history", key="start_date")

    return positions


def run_study(config: StudyConfig) -> StudyResult:
    validate_config(config)

    panel = load_panel(config.panel.path, config.panel.schema)
    filled = carry_forward_fill(panel, config.window_len, config.max_leading_fraction)

    daily = log_returns(panel.prices)
    positions = out_of_sample_positions(panel, config)

    result = StudyResult(config, filled, stats=descriptive_stats(daily), dates=[panel.dates[p] for p in positions])

    logger.info(f"Study over {len(positions)} dates from {panel.dates[positions[0]].date()} "
                f"to {panel.dates[positions[-1]].date()}, models {config.models}")

    cfg = forecast_config(config)
    estimators = build_estimators(config)
    forecasters = build_forecasters(config)

    for position in positions:
        _forecast_date(position, daily, filled, cfg, estimators, forecasters, result)

    logger.info(f"{len(result.records)} forecasts, {len(result.failures)} ledgered failures")

    _evaluate(result)

    return result


def _forecast_date(position: int,
                   daily: ReturnSeries,
                   panel: AlignedPanel,
                   cfg: risk.ForecastConfig,
                   estimators: typing.Mapping[str, risk.Estimator],
                   forecasters: typing.Mapping[str, DbnForecaster],
                   result: StudyResult) -> None:
    config = result.config
    audit = result.audit
    date = panel.dates[position]

    window = audit.returns(daily, position, position - cfg.window_len - 1, position - 1)

    # evaluation only: the h-day return dated on the forecast row
    realized = float(np.sum(daily.values[position - cfg.horizon_days:position]))

    stressed = None
    if risk.SES in config.metrics:
        stressed = build_stressed_window(audit.returns(daily, position, 0, position - 1), cfg.window_len, date)
        if config.export_stressed_members:
            result.stressed_windows.append(stressed)

    for model_id, estimator in estimators.items():
        forecast_return = None

        if model_id in forecasters:
            try:
                history = audit.rows(panel, position, position)
                forecast_return, relearned = forecasters[model_id].forecast(history, position)
            except LEDGERED_ERRORS as e:
                for metric_id in config.metrics:
                    _ledger(result, date, model_id, metric_id, e)
                continue

            if relearned and config.export_structures:
                result.structures.append((model_id, date, forecasters[model_id].structure))

        for metric_id in config.metrics:
            try:
                if metric_id == risk.ES:
                    prediction = estimator.predict(window, cfg, risk.ES, forecast_return, date)
                else:
                    prediction = stressed_var_es(stressed, estimator, cfg, forecast_return)

                prediction = _clamped(prediction, model_id, date)
                pit = float(bt.pit_transform([prediction.law], [realized], pd.Index([date])).values[0])

                result.records.append(risk.make_forecast_record(date, model_id, metric_id, prediction, realized, cfg, pit))
            except LEDGERED_ERRORS as e:
                _ledger(result, date, model_id, metric_id, e)

    logger.debug(f"Forecasts for {date.date()} done")


def _clamped(prediction: risk.Prediction, model_id: str, date: pd.Timestamp) -> risk.Prediction:
    if prediction.var >= 0 and prediction.es >= 0:
        return prediction

    logger.warning(f"{model_id} on {date.date()}: negative loss forecast (var={prediction.var:.6g}, "
                   f"es={prediction.es:.6g}) clamped to zero")

    return dataclasses.replace(prediction, var=max(prediction.var, 0.0), es=max(prediction.es, 0.0))


def _ledger(result: StudyResult, date, model_id, metric_id, error: BaseException) -> None:
    message = getattr(error, "message", None) or str(error)
    result.failures.append(Failure(date, model_id, metric_id, type(error).__name__, message))

    logger.warning(f"{model_id}/{metric_id} failed on {date.date() if date is not None else 'backtest'}: {message}")


def _evaluate(result: StudyResult) -> None:
    config = result.config
    settings = config.backtests

    by_key = collections.defaultdict(list)
    for record in result.records:
        by_key[(record.model_id, record.metric_id)].append(record)

    for model_id in config.models:
        for metric_id in config.metrics:
            records = by_key.get((model_id, metric_id), [])
            if not records:
                continue

            outcomes = []

            n_es_breaches = sum(r.es_breach for r in records)
            outcomes.append(bt.traffic_light(n_es_breaches, len(records), config.alpha))

            tests = [
                lambda: bt.z_cb(records, settings.mc_trials, config.seed, settings.significance, config.portfolio_value),
                lambda: bt.z_mb(records, config.alpha, settings.mc_trials, config.seed, settings.significance,
                                portfolio_value=config.portfolio_value),
                lambda: bt.z_mb(records, config.alpha, settings.mc_trials, config.seed, settings.significance,
                                as_printed=True, portfolio_value=config.portfolio_value),
                lambda: _du_escanciano(records, model_id, config),
            ]

            for test in tests:
                try:
                    outcomes.append(test())
                except LEDGERED_ERRORS as e:
                    _ledger(result, None, model_id, metric_id, e)

            result.outcomes[(model_id, metric_id)] = outcomes

            try:
                result.scores.append(score(records, metric_id, config.portfolio_value))
            except LEDGERED_ERRORS as e:
                _ledger(result, None, model_id, metric_id, e)

            logger.info(f"{model_id}/{metric_id}: " + ", ".join(f"{o.test_id}={o.decision}" for o in outcomes))


def _du_escanciano(records, model_id, config: StudyConfig) -> bt.BacktestOutcome:
    settings = config.backtests

    outcome = bt.du_escanciano(bt.pit_series(records), config.alpha, settings.de_lags, settings.significance,
                               settings.mc_trials if settings.de_monte_carlo else 0, config.seed)

    if model_id in DBN_MODELS:
        note = "forecast-augmented window changes the return distribution daily"
        outcome = dataclasses.replace(outcome, diagnostic=f"{outcome.diagnostic}; {note}" if outcome.diagnostic else note)

    return outcome
