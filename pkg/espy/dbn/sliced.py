import dataclasses
import logging
import typing

import numpy as np
import pandas as pd

from ..data import AlignedPanel
from .structure import DbnError, current, lagged


logger = logging.getLogger("dbn")


MIN_ROWS = 200


@dataclasses.dataclass(frozen=True)
class SlicedDataset:
    """Consecutive-day pairs of a standardized panel window.

    Row i of ``lagged_values`` holds day i of the window and row i of
    ``current_values`` day i + 1, column j being ``variables[j]``.
    """

    variables: typing.Tuple[str, ...]
    lagged_values: np.ndarray
    current_values: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    dates: pd.Index

    @property
    def n_rows(self) -> int:
        return len(self.current_values)

    @property
    def nodes(self) -> typing.Tuple[str, ...]:
        return tuple(lagged(v) for v in self.variables) + tuple(current(v) for v in self.variables)

    @property
    def matrix(self) -> np.ndarray:
        """Columns ordered as :attr:`nodes`."""
        return np.hstack([self.lagged_values, self.current_values])

    def index_of(self, variable: str) -> int:
        try:
            return self.variables.index(variable)
        except ValueError:
            raise DbnError(f"Variable '{variable}' is not in the dataset", node=variable)

    def standardize(self, variable: str, raw: np.ndarray) -> np.ndarray:
        j = self.index_of(variable)
        return (np.asarray(raw, dtype=float) - self.means[j]) / self.stds[j]

    def destandardize(self, variable: str, values: np.ndarray) -> np.ndarray:
        j = self.index_of(variable)
        return np.asarray(values, dtype=float) * self.stds[j] + self.means[j]


def make_sliced(panel: AlignedPanel, start: int = 0, stop: typing.Optional[int] = None) -> SlicedDataset:
    """Pairs consecutive rows ``start..stop-1`` of a filled panel, with every
    column standardized on those rows."""
    frame = panel.frame.iloc[start:stop]

    if len(frame) < MIN_ROWS:
        raise DbnError(f"Training window of {len(frame)} rows is shorter than {MIN_ROWS}")

    values = frame.to_numpy(dtype=float)

    missing = ~np.isfinite(values)
    if missing.any():
        column = frame.columns[np.flatnonzero(missing.any(axis=0))[0]]
        raise DbnError(f"Column '{column}' has missing values in the training window", node=column)

    means = values.mean(axis=0)
    stds = values.std(axis=0)
    spans = np.ptp(values, axis=0)

    for j, column in enumerate(frame.columns):
        if spans[j] == 0 or not stds[j] > 0:
            raise DbnError(f"Column '{column}' is constant over the training window", node=column)

    standardized = (values - means) / stds

    logger.debug(f"Sliced {len(frame)} rows x {len(frame.columns)} variables ending {frame.index[-1]}")

    return SlicedDataset(
        variables=tuple(frame.columns),
        lagged_values=standardized[:-1],
        current_values=standardized[1:],
        means=means,
        stds=stds,
        dates=frame.index[1:]
    )
