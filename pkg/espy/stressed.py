"""Stressed calibration windows.

The stressed window for a forecast date is the amalgamation of the most
severe daily returns seen before that date: the ``window_len`` lowest daily
log returns, kept in chronological order. The selected days are generally not
consecutive; the estimators treat the ordered selection as if it were a
consecutive series, so the overlapping h-day sums run across gaps in the
calendar.
"""

import dataclasses
import logging
import typing

import numpy as np
import pandas as pd

from . import risk
from .data import ReturnSeries
from .errors import ModelError


logger = logging.getLogger("stressed")


class StressedWindowError(ModelError):
    pass


@dataclasses.dataclass(frozen=True)
class StressedWindow:
    forecast_date: pd.Timestamp
    member_dates: pd.Index
    member_returns: np.ndarray

    def __len__(self) -> int:
        return len(self.member_returns)

    def as_series(self) -> ReturnSeries:
        return ReturnSeries(self.member_dates, self.member_returns, 1)


def build_stressed_window(history: ReturnSeries,
                          window_len: int,
                          forecast_date: typing.Optional[pd.Timestamp] = None) -> StressedWindow:
    """Selects the ``window_len`` lowest daily returns of ``history``.

    ``history`` must only hold returns dated before ``forecast_date``. Equal
    returns are ranked so that the more recent day is selected first.
    """
    if history.horizon_days != 1:
        raise StressedWindowError(f"Stressed windows are built from daily returns, got {history.horizon_days}-day returns")

    if len(history) < window_len:
        raise StressedWindowError(f"Need {window_len} daily returns for a stressed window, got {len(history)}")

    if forecast_date is not None and history.dates[-1] >= forecast_date:
        raise StressedWindowError(f"History ends on {history.dates[-1]}, not before the forecast date {forecast_date}")

    positions = np.arange(len(history))

    # smallest return first, later position first among equals
    order = np.lexsort((-positions, history.values))
    members = np.sort(order[:window_len])

    logger.debug(f"Stressed window for {forecast_date}: {window_len} of {len(history)} days, "
                 f"worst {history.values[order[0]]:.5f}")

    return StressedWindow(forecast_date, history.dates[members], history.values[members].copy())


def stressed_var_es(window: StressedWindow,
                    estimator: risk.Estimator,
                    cfg: risk.ForecastConfig,
                    forecast_return: typing.Optional[float] = None) -> risk.Prediction:
    """Runs ``estimator`` on the amalgamated window exactly as it runs on the
    ordinary one. A network forecast, when the estimator needs one, replaces
    the oldest member."""
    if isinstance(estimator, risk.Parametric):
        logger.debug(f"{estimator.model_id}: recalibrating on a non-consecutive stressed series for {window.forecast_date}")

    prediction = estimator.predict(window.as_series(), cfg, risk.SES, forecast_return, window.forecast_date)

    if isinstance(estimator, risk.Parametric) and prediction.diagnostics:
        logger.warning(f"{estimator.model_id} on the stressed window of {window.forecast_date}: "
                       f"{'; '.join(prediction.diagnostics)}")

    return prediction
