import dataclasses
import logging
import typing

import numpy as np

from .errors import ModelError
from .risk import ForecastRecord


logger = logging.getLogger("scores")


class ScoreError(ModelError):
    pass


@dataclasses.dataclass(frozen=True)
class ScoreReport:
    model_id: str
    metric_id: str
    mae: float
    rmse: float
    mape_pct: float
    n_obs: int
    n_smape_substitutions: int

    def __post_init__(self) -> None:
        if self.rmse < self.mae - 1e-12:
            raise ScoreError(f"{self.model_id}/{self.metric_id}: RMSE {self.rmse} below MAE {self.mae}")

    @property
    def sort_key(self) -> typing.Tuple[float, float, float, str]:
        return self.mae, self.rmse, self.mape_pct, self.model_id

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return dataclasses.asdict(self)


def score_values(forecasts: np.ndarray, realized: np.ndarray) -> typing.Tuple[float, float, float, int]:
    """MAE, RMSE, MAPE in percent and the number of SMAPE substitutions.

    A forecast is a loss magnitude and the realized value a signed return, so
    the residual is ``forecast + realized``. Dates with a zero realized
    return use the symmetric term 2|f - r| / (|f| + |r|).
    """
    forecasts = np.asarray(forecasts, dtype=float)
    realized = np.asarray(realized, dtype=float)

    if len(forecasts) == 0:
        raise ScoreError("Nothing to score")

    residuals = forecasts + realized
    zero = realized == 0
    both_zero = zero & (forecasts == 0)

    if np.all(both_zero):
        raise ScoreError("Every forecast and realized value is zero: percentage error is undefined")

    # a zero forecast of a zero return is a perfect forecast
    with np.errstate(divide="ignore", invalid="ignore"):
        percentage = np.where(both_zero, 0.0,
                              np.where(zero,
                                       2 * np.abs(forecasts - realized) / (np.abs(forecasts) + np.abs(realized)),
                                       np.abs(residuals) / np.abs(realized)))

    mae = float(np.mean(np.abs(residuals)))
    rmse = float(np.sqrt(np.mean(residuals ** 2)))

    # rounding can leave rmse an ulp below mae
    rmse = max(rmse, mae)

    return mae, rmse, float(100 * np.mean(percentage)), int(np.count_nonzero(zero))


def score(records: typing.Sequence[ForecastRecord], metric_id: str, portfolio_value: float = 1.0) -> ScoreReport:
    """Scores the ES forecasts of one model and metric."""
    selected = [r for r in records if r.metric_id == metric_id]

    if not selected:
        raise ScoreError(f"No {metric_id} records to score")

    model_ids = {r.model_id for r in selected}
    if len(model_ids) != 1:
        raise ScoreError(f"Records of several models {sorted(model_ids)} in one score")

    mae, rmse, mape, substitutions = score_values([r.es_forecast for r in selected],
                                                  [r.realized_h_return * portfolio_value for r in selected])

    if substitutions:
        logger.debug(f"{selected[0].model_id}/{metric_id}: {substitutions} SMAPE substitutions")

    return ScoreReport(selected[0].model_id, metric_id, mae, rmse, mape, len(selected), substitutions)


def rank_models(reports: typing.Sequence[ScoreReport]) -> typing.List[ScoreReport]:
    """Orders by MAE, then RMSE, then MAPE, then model id."""
    if len(reports) < 2:
        raise ScoreError(f"Ranking needs at least two reports, got {len(reports)}")

    metrics = {r.metric_id for r in reports}
    if len(metrics) != 1:
        raise ScoreError(f"Cannot rank across metrics {sorted(metrics)}")

    return sorted(reports, key=lambda r: r.sort_key)
