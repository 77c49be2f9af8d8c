import dataclasses
import logging
import math
import typing

import numpy as np
import pandas as pd
from scipy import stats

from . import distributions as dists
from . import volatility as vol
from .data import ReturnSeries, overlapping_h_returns
from .errors import ModelError


logger = logging.getLogger("risk")


ES = "es"
SES = "ses"

METRICS = (ES, SES)


class RiskError(ModelError):
    pass


@dataclasses.dataclass(frozen=True)
class ForecastConfig:
    alpha: float = 0.025
    horizon_days: int = 10
    window_len: int = 1264
    portfolio_value: float = 1.0

    def validate(self) -> None:
        if not 0 < self.alpha < 0.5:
            raise RiskError(f"alpha must lie in (0, 0.5), got {self.alpha}")

        if self.horizon_days < 1:
            raise RiskError(f"horizon must be at least one day, got {self.horizon_days}")

        if self.window_len <= self.horizon_days:
            raise RiskError(f"window of {self.window_len} days must exceed the {self.horizon_days}-day horizon")


class PredictiveLaw:
    """Predictive distribution of the realized h-day return on one date."""

    def cdf(self, x: float) -> float:
        raise NotImplementedError()

    def sample(self, n: int, seed: typing.Union[int, typing.Sequence[int]]) -> np.ndarray:
        raise NotImplementedError()

    def compact(self, alpha: float) -> "PredictiveLaw":
        return self


@dataclasses.dataclass(frozen=True)
class ParametricLaw(PredictiveLaw):
    mu: float
    sigma: float
    dist: dists.InnovationDistribution

    def cdf(self, x):
        if self.sigma <= 0:
            return 1.0 if x >= self.mu else 0.0

        return float(self.dist.cdf(np.asarray((x - self.mu) / self.sigma)))

    def sample(self, n, seed):
        return self.mu + self.sigma * self.dist.sample(n, seed)


@dataclasses.dataclass(frozen=True)
class EmpiricalLaw(PredictiveLaw):
    """Empirical law of a calibration window.

    ``tail`` holds the smallest window values in ascending order and ``size``
    the window length; after :meth:`compact` only the lower tail is kept, which
    is all a breach can depend on. Ranks beyond the kept tail sample as +inf.
    """

    tail: np.ndarray
    size: int

    @staticmethod
    def from_window(values: np.ndarray) -> "EmpiricalLaw":
        return EmpiricalLaw(np.sort(np.asarray(values, dtype=float)), len(values))

    @property
    def is_complete(self) -> bool:
        return len(self.tail) == self.size

    def cdf(self, x):
        if x < self.tail[0]:
            return 0.0

        if not self.is_complete and x > self.tail[-1]:
            raise RiskError("Compacted empirical law has no CDF above its kept tail")

        positions = np.arange(len(self.tail)) / max(self.size - 1, 1)

        return float(np.interp(x, self.tail, positions, left=0.0, right=1.0))

    def sample(self, n, seed):
        ranks = np.random.default_rng(seed).integers(0, self.size, size=n)
        kept = ranks < len(self.tail)

        return np.where(kept, self.tail[np.minimum(ranks, len(self.tail) - 1)], np.inf)

    def compact(self, alpha):
        keep = min(self.size, int(math.ceil(2 * alpha * self.size)) + 1)
        return EmpiricalLaw(self.tail[:keep].copy(), self.size)


@dataclasses.dataclass(frozen=True)
class Prediction:
    var: float
    es: float
    law: PredictiveLaw
    diagnostics: typing.Tuple[str, ...] = ()


@dataclasses.dataclass(frozen=True)
class ForecastRecord:
    date: pd.Timestamp
    model_id: str
    metric_id: str
    var_forecast: float
    es_forecast: float
    realized_h_return: float
    var_breach: bool
    es_breach: bool
    pit: typing.Optional[float] = None
    law: typing.Optional[PredictiveLaw] = dataclasses.field(default=None, compare=False, repr=False)


def empirical_var_es(window: ReturnSeries, alpha: float, portfolio_value: float = 1.0) -> typing.Tuple[float, float]:
    """Historical-simulation VaR and ES as positive loss magnitudes.

    With m observations, k = floor(alpha * m) tail points: VaR is the k-th
    smallest return and ES the mean of the k smallest, both negated.
    """
    values = np.asarray(window.values, dtype=float)
    m = len(values)
    k = int(math.floor(alpha * m + 1e-9))

    if m < math.ceil(1.0 / alpha - 1e-9) or k < 1:
        raise RiskError(f"Window of {m} returns holds no tail observation at alpha={alpha}")

    smallest = np.partition(values, k - 1)[:k]
    smallest.sort()

    return -float(smallest[k - 1]) * portfolio_value, -float(np.mean(smallest)) * portfolio_value


def delta_normal_var_es(window: ReturnSeries, alpha: float, portfolio_value: float = 1.0) -> typing.Tuple[float, float]:
    values = np.asarray(window.values, dtype=float)

    if len(values) < 30:
        raise RiskError(f"Delta-normal needs at least 30 returns, got {len(values)}")

    mu, sigma = _moments(values)

    if np.ptp(values) == 0 or not sigma > 0:
        raise RiskError("Delta-normal window has zero variance")

    z = stats.norm.ppf(alpha)

    var = -(mu + sigma * z)
    es = -(mu - sigma * stats.norm.pdf(z) / alpha)

    return float(var) * portfolio_value, float(es) * portfolio_value


def parametric_var_es(model: vol.CalibratedModel, alpha: float, portfolio_value: float = 1.0) -> typing.Tuple[float, float]:
    sigma = math.sqrt(model.next_sigma2)
    innovation = model.params.dist
    mu = model.params.mu

    if sigma == 0:
        return -mu * portfolio_value, -mu * portfolio_value

    var = -(mu + sigma * innovation.quantile(alpha))
    es = -(mu + sigma * innovation.tail_expectation(alpha))

    return var * portfolio_value, es * portfolio_value


def bn_augmented_window(hist_daily: ReturnSeries,
                        forecast_return: float,
                        cfg: ForecastConfig,
                        forecast_date: typing.Optional[pd.Timestamp] = None) -> ReturnSeries:
    """Appends the network's one-day-ahead return to the window_len - 1
    preceding daily returns and rolls the result into overlapping h-day
    returns. The last h-day return mixes h - 1 realized days with the
    forecast day."""
    if len(hist_daily) != cfg.window_len - 1:
        raise RiskError(f"BN window needs {cfg.window_len - 1} daily returns, got {len(hist_daily)}")

    if not math.isfinite(forecast_return):
        raise RiskError(f"Forecast return {forecast_return} is not finite")

    label = forecast_date if forecast_date is not None else pd.NaT
    dates = hist_daily.dates.append(pd.Index([label]))
    combined = ReturnSeries(dates, np.append(hist_daily.values, forecast_return), 1)

    return overlapping_h_returns(combined, cfg.horizon_days)


def make_forecast_record(date: pd.Timestamp,
                         model_id: str,
                         metric_id: str,
                         prediction: Prediction,
                         realized_h_return: float,
                         cfg: ForecastConfig,
                         pit: typing.Optional[float] = None) -> ForecastRecord:
    if prediction.var < 0 or prediction.es < 0:
        raise RiskError(f"Forecasts must be loss magnitudes >= 0, got var={prediction.var}, es={prediction.es}")

    loss_scale = cfg.portfolio_value
    realized = realized_h_return * loss_scale

    return ForecastRecord(
        date=date,
        model_id=model_id,
        metric_id=metric_id,
        var_forecast=prediction.var,
        es_forecast=prediction.es,
        realized_h_return=realized_h_return,
        var_breach=bool(realized < -prediction.var),
        es_breach=bool(realized < -prediction.es),
        pit=pit,
        law=prediction.law.compact(cfg.alpha) if prediction.law is not None else None
    )


class Estimator:
    """Turns a daily calibration window into a (VaR, ES) prediction for the
    h-day return ending on the forecast date."""

    model_id: str = None
    needs_forecast: bool = False

    def predict(self,
                daily: ReturnSeries,
                cfg: ForecastConfig,
                metric_id: str = ES,
                forecast_return: typing.Optional[float] = None,
                forecast_date: typing.Optional[pd.Timestamp] = None) -> Prediction:
        raise NotImplementedError()

    def __repr__(self) -> str:
        return self.model_id


class HistoricalSimulation(Estimator):

    model_id = "hs"

    def predict(self, daily, cfg, metric_id=ES, forecast_return=None, forecast_date=None):
        window = overlapping_h_returns(daily, cfg.horizon_days)
        var, es = empirical_var_es(window, cfg.alpha, cfg.portfolio_value)

        return Prediction(var, es, EmpiricalLaw.from_window(window.values))


class DeltaNormal(Estimator):

    model_id = "delta_normal"

    def predict(self, daily, cfg, metric_id=ES, forecast_return=None, forecast_date=None):
        window = overlapping_h_returns(daily, cfg.horizon_days)
        var, es = delta_normal_var_es(window, cfg.alpha, cfg.portfolio_value)
        mu, sigma = _moments(window.values)

        return Prediction(var, es, ParametricLaw(mu, sigma, dists.NormalDistribution()))


class Parametric(Estimator):
    """A volatility family calibrated directly on overlapping h-day returns,
    warm-started from the previous date's fit of the same metric."""

    def __init__(self, family: str, dist_kind: str, restarts: int = 3, max_iter: int = 4000,
                 warm_start: bool = True, seed: int = 0) -> None:
        self.family = family
        self.dist_kind = dist_kind
        self.model_id = f"{family}_{dist_kind}"
        self.restarts = restarts
        self.max_iter = max_iter
        self.warm_start = warm_start
        self.seed = seed
        self._previous: typing.Dict[str, vol.ModelParams] = {}

    def predict(self, daily, cfg, metric_id=ES, forecast_return=None, forecast_date=None):
        window = overlapping_h_returns(daily, cfg.horizon_days)

        model = vol.calibrate_mle(self.family, window, self.dist_kind,
                                  start=self._previous.get(metric_id) if self.warm_start else None,
                                  restarts=self.restarts, max_iter=self.max_iter, seed=self.seed)

        self._previous[metric_id] = model.params

        var, es = parametric_var_es(model, cfg.alpha, cfg.portfolio_value)
        law = ParametricLaw(model.params.mu, math.sqrt(model.next_sigma2), model.params.dist)

        return Prediction(var, es, law, model.diagnostics)


class BnAugmented(Estimator):
    """Historical simulation over the window whose newest day is the
    network's one-day-ahead forecast."""

    needs_forecast = True

    def __init__(self, algorithm: str) -> None:
        self.algorithm = algorithm
        self.model_id = f"dbn_{algorithm}"

    def predict(self, daily, cfg, metric_id=ES, forecast_return=None, forecast_date=None):
        if forecast_return is None:
            raise RiskError(f"{self.model_id} needs a one-day-ahead forecast")

        window = bn_augmented_window(daily[len(daily) - (cfg.window_len - 1):], forecast_return, cfg, forecast_date)
        var, es = empirical_var_es(window, cfg.alpha, cfg.portfolio_value)

        return Prediction(var, es, EmpiricalLaw.from_window(window.values))


def _moments(values: np.ndarray) -> typing.Tuple[float, float]:
    return float(np.mean(values)), float(np.std(values, ddof=1))
