"""Backtests of (VaR, ES) forecast streams.

Forecasts are positive loss magnitudes and ``X`` is the signed P&L, so a VaR
breach is ``X < -VaR``. Monte Carlo significance draws the P&L of every date
from that date's predictive law, which is the null hypothesis of a correctly
specified model.
"""

import dataclasses
import logging
import typing

import numpy as np
import pandas as pd
from scipy import stats

from .errors import ModelError
from .risk import ForecastRecord, PredictiveLaw


logger = logging.getLogger("backtests")


PASS = "pass"
REJECT = "reject"
CANNOT_PERFORM = "cannot_perform"

GREEN = "green"
YELLOW = "yellow"
RED = "red"

YELLOW_FROM = 0.95
RED_FROM = 0.9999

TRAFFIC_LIGHT = "traffic_light"
Z_CB = "z_cb"
Z_MB = "z_mb"
Z_MB_AS_PRINTED = "z_mb_as_printed"
DU_ESCANCIANO = "du_escanciano"

MIN_TRIALS = 100
MIN_PIT_LENGTH = 50

NullSimulator = typing.Callable[[int, int], np.ndarray]


class BacktestError(ModelError):
    pass


@dataclasses.dataclass(frozen=True)
class BacktestOutcome:
    test_id: str
    statistic: typing.Optional[float]
    p_value: typing.Optional[float]
    decision: str
    n_breaches: int
    n_obs: int
    zone: typing.Optional[str] = None
    diagnostic: typing.Optional[str] = None

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class PitSeries:
    dates: pd.Index
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.dates) != len(self.values):
            raise BacktestError(f"{len(self.dates)} dates for {len(self.values)} PIT values")

        if np.any(~((self.values >= 0) & (self.values <= 1))):
            raise BacktestError("PIT values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.values)


def traffic_light(n_breaches: int, n_obs: int, coverage: float) -> BacktestOutcome:
    """Zone from the probability of at most ``n_breaches`` breaches under
    Binomial(n_obs, coverage)."""
    if n_obs < 1:
        raise BacktestError(f"Traffic light needs at least one observation, got {n_obs}")

    if not 0 < coverage < 1:
        raise BacktestError(f"Coverage must lie in (0, 1), got {coverage}")

    if not 0 <= n_breaches <= n_obs:
        raise BacktestError(f"{n_breaches} breaches is impossible in {n_obs} observations")

    cumulative = float(stats.binom.cdf(n_breaches, n_obs, coverage))

    if cumulative < YELLOW_FROM:
        zone = GREEN
    elif cumulative < RED_FROM:
        zone = YELLOW
    else:
        zone = RED

    return BacktestOutcome(TRAFFIC_LIGHT, cumulative, None, REJECT if zone == RED else PASS,
                           n_breaches, n_obs, zone=zone)


def zone_boundaries(n_obs: int, coverage: float) -> typing.Tuple[int, int]:
    """Smallest breach counts that land in the yellow and the red zone."""
    counts = np.arange(n_obs + 1)
    cumulative = stats.binom.cdf(counts, n_obs, coverage)

    return int(np.argmax(cumulative >= YELLOW_FROM)), int(np.argmax(cumulative >= RED_FROM))


def z_cb_statistic(pnl: np.ndarray, var: np.ndarray, es: np.ndarray) -> np.ndarray:
    """Conditional statistic along the last axis; NaN where nothing breached."""
    pnl = np.asarray(pnl, dtype=float)
    breaches = pnl < -var
    counts = breaches.sum(axis=-1)

    if np.any(breaches & (es == 0)):
        raise BacktestError("ES forecast of zero on a VaR-breach day")

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(breaches, pnl / np.where(es == 0, 1.0, es), 0.0)
        return np.where(counts > 0, ratio.sum(axis=-1) / np.maximum(counts, 1) + 1.0, np.nan)


def z_mb_statistic(pnl: np.ndarray, var: np.ndarray, es: np.ndarray, alpha: float, as_printed: bool = False) -> np.ndarray:
    """Minimally biased statistic along the last axis. The as-printed variant
    puts VaR + ES in place of VaR + X in the breach term."""
    pnl = np.asarray(pnl, dtype=float)
    breaches = pnl < -var

    excess = var + es if as_printed else var + pnl
    terms = es - var + np.where(breaches, excess, 0.0) / alpha

    return terms.mean(axis=-1)


def mc_pvalue(observed: float, null_simulator: NullSimulator, trials: int, seed: int) -> float:
    """One-sided p-value (1 + #{simulated <= observed}) / (valid + 1).

    ``null_simulator(trials, seed)`` returns the simulated statistics; NaN
    entries (replications where the statistic is undefined) are dropped.
    """
    if trials < MIN_TRIALS:
        raise BacktestError(f"Need at least {MIN_TRIALS} Monte Carlo trials, got {trials}")

    simulated = np.asarray(null_simulator(trials, seed), dtype=float)
    valid = simulated[~np.isnan(simulated)]

    if len(valid) == 0:
        raise BacktestError("Every null replication was undefined")

    return float((1 + np.count_nonzero(valid <= observed)) / (len(valid) + 1))


def record_arrays(records: typing.Sequence[ForecastRecord], portfolio_value: float = 1.0) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    pnl = np.array([r.realized_h_return for r in records], dtype=float) * portfolio_value
    var = np.array([r.var_forecast for r in records], dtype=float)
    es = np.array([r.es_forecast for r in records], dtype=float)

    return pnl, var, es


def null_pnl(laws: typing.Sequence[PredictiveLaw], trials: int, seed: int, portfolio_value: float = 1.0) -> np.ndarray:
    """P&L matrix [trials, dates], column ``i`` drawn from ``laws[i]`` with
    seed (seed, i)."""
    if any(law is None for law in laws):
        raise BacktestError("A record has no predictive law to simulate from")

    columns = [law.sample(trials, (seed, i)) for i, law in enumerate(laws)]

    return np.column_stack(columns) * portfolio_value


def z_cb(records: typing.Sequence[ForecastRecord],
         trials: int = 1000,
         seed: int = 0,
         significance: float = 0.025,
         portfolio_value: float = 1.0) -> BacktestOutcome:
    pnl, var, es = record_arrays(records, portfolio_value)
    n_breaches = int(np.count_nonzero(pnl < -var))

    if n_breaches == 0:
        return BacktestOutcome(Z_CB, None, None, CANNOT_PERFORM, 0, len(records),
                               diagnostic="no VaR breach")

    observed = float(z_cb_statistic(pnl, var, es))

    simulator = lambda n, s: z_cb_statistic(null_pnl([r.law for r in records], n, s, portfolio_value), var, es)
    p_value = mc_pvalue(observed, simulator, trials, seed)

    return BacktestOutcome(Z_CB, observed, p_value, _decide(p_value, significance), n_breaches, len(records))


def z_mb(records: typing.Sequence[ForecastRecord],
         alpha: float,
         trials: int = 1000,
         seed: int = 0,
         significance: float = 0.025,
         as_printed: bool = False,
         portfolio_value: float = 1.0) -> BacktestOutcome:
    if not records:
        raise BacktestError("No forecasts to backtest")

    pnl, var, es = record_arrays(records, portfolio_value)
    n_breaches = int(np.count_nonzero(pnl < -var))

    observed = float(z_mb_statistic(pnl, var, es, alpha, as_printed))

    simulator = lambda n, s: z_mb_statistic(null_pnl([r.law for r in records], n, s, portfolio_value), var, es, alpha, as_printed)
    p_value = mc_pvalue(observed, simulator, trials, seed)

    return BacktestOutcome(Z_MB_AS_PRINTED if as_printed else Z_MB, observed, p_value,
                           _decide(p_value, significance), n_breaches, len(records))


def pit_transform(laws: typing.Sequence[PredictiveLaw], realized: typing.Sequence[float],
                  dates: typing.Optional[pd.Index] = None) -> PitSeries:
    if len(laws) != len(realized):
        raise BacktestError(f"{len(laws)} predictive laws for {len(realized)} returns")

    values = []
    for i, (law, x) in enumerate(zip(laws, realized)):
        if law is None:
            raise BacktestError(f"No predictive distribution for date {i}")

        values.append(min(max(law.cdf(float(x)), 0.0), 1.0))

    dates = dates if dates is not None else pd.RangeIndex(len(values))

    return PitSeries(pd.Index(dates), np.array(values, dtype=float))


def pit_series(records: typing.Sequence[ForecastRecord]) -> PitSeries:
    """PITs stored on the records at forecast time."""
    missing = [r.date for r in records if r.pit is None]
    if missing:
        raise BacktestError(f"No PIT recorded for {len(missing)} dates, first {missing[0]}")

    return PitSeries(pd.Index([r.date for r in records]), np.array([r.pit for r in records], dtype=float))


def cumulative_breaches(u: np.ndarray, alpha: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.where(u <= alpha, (alpha - u) / alpha, 0.0)


def du_escanciano_statistic(u: np.ndarray, alpha: float, n_lags: int = 1) -> float:
    """N times the sum of squared autocorrelations of H - alpha/2, with the
    autocovariances divided by N."""
    h = cumulative_breaches(u, alpha) - alpha / 2
    n = len(h)

    gamma0 = np.dot(h, h) / n
    rho = np.array([np.dot(h[j:], h[:-j]) / n for j in range(1, n_lags + 1)]) / gamma0

    return float(n * np.sum(rho ** 2))


def du_escanciano(pit: PitSeries,
                  alpha: float,
                  n_lags: int = 1,
                  significance: float = 0.025,
                  monte_carlo_trials: int = 0,
                  seed: int = 0) -> BacktestOutcome:
    if len(pit) < MIN_PIT_LENGTH:
        raise BacktestError(f"Need at least {MIN_PIT_LENGTH} PIT values, got {len(pit)}")

    if not 1 <= n_lags < len(pit):
        raise BacktestError(f"Lag count {n_lags} is out of range for {len(pit)} values")

    u = pit.values
    n_breaches = int(np.count_nonzero(u <= alpha))
    h = cumulative_breaches(u, alpha)

    if np.ptp(h) == 0:
        logger.debug(f"Du-Escanciano: constant cumulative-breach series over {len(u)} dates")
        return BacktestOutcome(DU_ESCANCIANO, None, None, CANNOT_PERFORM, n_breaches, len(u),
                               diagnostic="cumulative-breach series has zero variance")

    statistic = du_escanciano_statistic(u, alpha, n_lags)

    if monte_carlo_trials:
        def simulator(trials, s):
            draws = np.random.default_rng(s).random((trials, len(u)))
            return np.array([-du_escanciano_statistic(row, alpha, n_lags) for row in draws])

        p_value = mc_pvalue(-statistic, simulator, monte_carlo_trials, seed)
    else:
        p_value = float(stats.chi2.sf(statistic, n_lags))

    return BacktestOutcome(DU_ESCANCIANO, statistic, p_value, _decide(p_value, significance), n_breaches, len(u))


def _decide(p_value: float, significance: float) -> str:
    return REJECT if p_value < significance else PASS
