import dataclasses
import logging
import pathlib
import typing

import numpy as np
import pandas as pd
from scipy import stats


logger = logging.getLogger("data")


class DataError(Exception):

    def __init__(self, message: str, column: typing.Optional[str] = None, row: typing.Optional[int] = None) -> None:
        super().__init__(message)
        self.message = message
        self.column = column
        self.row = row


@dataclasses.dataclass
class PanelSchema:
    target_column: str
    date_column: typing.Optional[str] = None
    columns: typing.Optional[typing.List[str]] = None
    classifications: typing.Dict[str, str] = dataclasses.field(default_factory=dict)


@dataclasses.dataclass(frozen=True)
class AlignedPanel:
    """Date-indexed panel of the target price series and its explanatory
    variables, on the target's trading calendar.

    ``leading_gaps`` counts the missing prefix of each column and
    ``flagged_columns`` lists the columns whose prefix exceeds the allowed
    fraction of the initial training window. Both are only populated by
    :func:`carry_forward_fill`.
    """

    frame: pd.DataFrame
    target_column: str
    leading_gaps: typing.Dict[str, int] = dataclasses.field(default_factory=dict)
    flagged_columns: typing.Tuple[str, ...] = ()

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.frame.index

    @property
    def columns(self) -> typing.List[str]:
        return list(self.frame.columns)

    @property
    def prices(self) -> pd.Series:
        return self.frame[self.target_column]

    def __len__(self) -> int:
        return len(self.frame)

    def rows_before(self, position: int) -> "AlignedPanel":
        return dataclasses.replace(self, frame=self.frame.iloc[:position])


@dataclasses.dataclass(frozen=True)
class ReturnSeries:
    dates: pd.DatetimeIndex
    values: np.ndarray
    horizon_days: int = 1

    def __post_init__(self) -> None:
        if len(self.dates) != len(self.values):
            raise DataError(f"{len(self.dates)} dates for {len(self.values)} values")

        if not np.all(np.isfinite(self.values)):
            raise DataError("Return series contains non-finite values")

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, key: slice) -> "ReturnSeries":
        if not isinstance(key, slice):
            raise TypeError("ReturnSeries only supports slicing")

        return ReturnSeries(self.dates[key], self.values[key], self.horizon_days)

    def to_series(self) -> pd.Series:
        return pd.Series(self.values, index=self.dates, name=f"r{self.horizon_days}")


@dataclasses.dataclass(frozen=True)
class DescriptiveStats:
    mean: float
    std_dev: float
    min: float
    max: float
    skewness: float
    kurtosis: float
    n_obs: int

    def as_dict(self) -> typing.Dict[str, float]:
        return dataclasses.asdict(self)


def load_panel(csv_path: typing.Union[str, pathlib.Path], schema: PanelSchema) -> AlignedPanel:
    path = pathlib.Path(csv_path)

    if not path.exists():
        raise DataError(f"Panel file '{path}' does not exist.")

    raw = pd.read_csv(path, dtype=str, keep_default_na=False)

    date_column = schema.date_column or raw.columns[0]

    if date_column not in raw.columns:
        raise DataError(f"Date column '{date_column}' not found.", column=date_column)

    if schema.target_column not in raw.columns:
        raise DataError(f"Target column '{schema.target_column}' not found.", column=schema.target_column)

    value_columns = schema.columns or [c for c in raw.columns if c != date_column]

    if schema.target_column not in value_columns:
        value_columns = [schema.target_column] + list(value_columns)

    missing = [c for c in value_columns if c not in raw.columns]
    if missing:
        raise DataError(f"Columns {missing} not found in '{path}'.", column=missing[0])

    date_cells = raw[date_column].str.strip()
    blank = (date_cells == "").to_numpy()

    if blank.any():
        row = int(np.flatnonzero(blank)[0])
        raise DataError(f"Missing date in column '{date_column}'.", column=date_column, row=row)

    try:
        dates = pd.to_datetime(date_cells, format="ISO8601")
    except (ValueError, TypeError) as e:
        raise DataError(f"Unparseable date in column '{date_column}': {e}", column=date_column)

    if dates.isna().any():
        row = int(np.flatnonzero(dates.isna().to_numpy())[0])
        raise DataError(f"Missing date in column '{date_column}'.", column=date_column, row=row)

    frame = pd.DataFrame(index=pd.DatetimeIndex(dates, name="date"))

    for column in value_columns:
        cells = raw[column].str.strip()
        numeric = pd.to_numeric(cells.where(cells != ""), errors="coerce")
        bad = numeric.isna() & (cells != "")

        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise DataError(f"Unparseable cell '{cells.iloc[row]}' in column '{column}'.", column=column, row=row)

        frame[column] = numeric.to_numpy(dtype=float)

    if frame.index.has_duplicates:
        duplicate = frame.index[frame.index.duplicated()][0]
        raise DataError(f"Duplicate date {duplicate.date()} in '{path}'.")

    frame = frame.sort_index()

    logger.debug(f"Loaded {len(frame)} rows and {len(value_columns)} columns from {path}")

    return align_to_target(AlignedPanel(frame, schema.target_column))


def align_to_target(panel: AlignedPanel) -> AlignedPanel:
    # Rows where the target is missing are folded into the next target date,
    # keeping the latest observation of each explanatory column.
    frame = panel.frame
    observed = frame[panel.target_column].notna().to_numpy()

    if not observed.any():
        raise DataError("Target column has no observations.", column=panel.target_column)

    trading_dates = frame.index[observed]
    slot = np.searchsorted(trading_dates.values, frame.index.values, side="left")
    keep = slot < len(trading_dates)

    aligned = frame[keep].groupby(trading_dates[slot[keep]]).last()
    aligned.index.name = frame.index.name

    dropped = len(frame) - len(aligned)
    if dropped:
        logger.debug(f"Aligned {dropped} non-trading rows onto the target calendar")

    return dataclasses.replace(panel, frame=aligned[frame.columns])


def carry_forward_fill(panel: AlignedPanel,
                       window_len: typing.Optional[int] = None,
                       max_leading_fraction: float = 0.10) -> AlignedPanel:
    frame = panel.frame
    leading_gaps = {}
    flagged = []

    window = window_len if window_len is not None else len(frame)
    allowed = max_leading_fraction * window

    for column in frame.columns:
        observed = frame[column].notna().to_numpy()

        if not observed.any():
            raise DataError(f"Column '{column}' has no observations.", column=column)

        leading_gaps[column] = int(np.argmax(observed))

        if leading_gaps[column] > allowed:
            flagged.append(column)
            logger.warning(f"Column '{column}' is missing its first {leading_gaps[column]} rows "
                           f"(more than {max_leading_fraction:.0%} of a {window}-day window)")

    return dataclasses.replace(panel,
                               frame=frame.ffill(),
                               leading_gaps=leading_gaps,
                               flagged_columns=tuple(flagged))


def log_returns(prices: typing.Union[pd.Series, typing.Sequence[float], np.ndarray],
                dates: typing.Optional[typing.Sequence] = None) -> ReturnSeries:
    if isinstance(prices, pd.Series):
        dates = prices.index if dates is None else dates
        prices = prices.to_numpy(dtype=float)

    prices = np.asarray(prices, dtype=float)

    if len(prices) < 2:
        raise DataError("At least two prices are needed for a return.")

    if np.any(~(prices > 0)):
        row = int(np.flatnonzero(~(prices > 0))[0])
        raise DataError(f"Non-positive price {prices[row]} at position {row}.", row=row)

    if dates is None:
        dates = pd.RangeIndex(len(prices))

    values = np.log(prices[1:] / prices[:-1])

    return ReturnSeries(pd.Index(dates)[1:], values, 1)


def overlapping_h_returns(daily: ReturnSeries, h: int) -> ReturnSeries:
    if h < 1:
        raise DataError(f"Horizon must be at least one day, got {h}.")

    if daily.horizon_days != 1:
        raise DataError(f"Expected daily returns, got {daily.horizon_days}-day returns.")

    if len(daily) < h:
        raise DataError(f"Series of {len(daily)} returns is shorter than the {h}-day horizon.")

    sums = np.lib.stride_tricks.sliding_window_view(daily.values, h).sum(axis=1)

    return ReturnSeries(daily.dates[h - 1:], sums, h)


def descriptive_stats(returns: ReturnSeries) -> DescriptiveStats:
    values = returns.values

    if len(values) < 4:
        raise DataError(f"Need at least 4 returns for moments, got {len(values)}.")

    std_dev = float(np.std(values, ddof=1))

    if np.ptp(values) == 0 or not std_dev > 0:
        raise DataError("Zero-variance series: skewness and kurtosis are undefined.")

    return DescriptiveStats(
        mean=float(np.mean(values)),
        std_dev=std_dev,
        min=float(np.min(values)),
        max=float(np.max(values)),
        skewness=float(stats.skew(values, bias=False)),
        kurtosis=float(stats.kurtosis(values, fisher=False, bias=False)),
        n_obs=len(values)
    )
