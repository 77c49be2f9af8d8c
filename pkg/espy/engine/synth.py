"""Synthetic panels for demos and tests.

``garch`` is a GARCH(1,1) price path with three explanatory columns: one
driven by the previous close, one only published on month ends and one
missing for the first tenth of the rows. ``chain`` is the first-order
linear-Gaussian chain A -> B -> close, each variable also depending on its
own previous value.
"""

import logging
import pathlib
import typing

import numpy as np
import pandas as pd

from .. import volatility as vol
from .config import ConfigError


logger = logging.getLogger("engine")


GARCH_PRESET = "garch"
CHAIN_PRESET = "chain"

PRESETS = (GARCH_PRESET, CHAIN_PRESET)

TARGET = "close"

START = "2000-01-03"

GARCH_PARAMS = vol.ModelParams(vol.GARCH, omega=2e-6, alpha=0.08, beta=0.90)

# (own lag, parent lag) coefficients of A, B and close
CHAIN_COEFFICIENTS = {"A": (0.6, 0.0), "B": (0.5, 0.4), TARGET: (0.5, 0.4)}

CHAIN_LEVEL = 1000.0
CHAIN_SCALE = 20.0


def garch_panel(n: int, seed: int) -> pd.DataFrame:
    rng = np.random.default_rng((seed, 1))

    returns, _ = vol.simulate(GARCH_PARAMS, n - 1, seed)
    close = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(returns)]))

    follower = np.empty(n)
    follower[0] = close[0]
    follower[1:] = 0.5 * close[:-1] + 0.5 * close[0] + rng.normal(0.0, 1.0, n - 1)

    dates = pd.bdate_range(START, periods=n)

    monthly = pd.Series(np.cumsum(rng.normal(0.0, 0.1, n)) + 5.0, index=dates)
    month_end = dates.to_series().groupby(dates.to_period("M")).transform("max") == dates.to_series()
    monthly[~month_end.to_numpy()] = np.nan

    late = 50.0 + np.cumsum(rng.normal(0.0, 0.5, n))
    late[:n // 10] = np.nan

    return pd.DataFrame({TARGET: close, "follower": follower, "monthly": monthly.to_numpy(), "late": late},
                        index=pd.Index(dates, name="date"))


def chain_values(n: int, seed: int) -> np.ndarray:
    """Columns A, B, close in standard units; each variable depends on its own
    lag and on the lag of its predecessor in the chain."""
    rng = np.random.default_rng(seed)
    burn = 200

    values = np.zeros((n + burn, 3))
    noise = rng.standard_normal((n + burn, 3))

    for t in range(1, n + burn):
        previous = values[t - 1]
        values[t, 0] = CHAIN_COEFFICIENTS["A"][0] * previous[0] + noise[t, 0]
        values[t, 1] = CHAIN_COEFFICIENTS["B"][0] * previous[1] + CHAIN_COEFFICIENTS["B"][1] * previous[0] + noise[t, 1]
        values[t, 2] = CHAIN_COEFFICIENTS[TARGET][0] * previous[2] + CHAIN_COEFFICIENTS[TARGET][1] * previous[1] + noise[t, 2]

    return values[burn:]


def chain_panel(n: int, seed: int) -> pd.DataFrame:
    values = chain_values(n, seed)
    dates = pd.bdate_range(START, periods=n)

    return pd.DataFrame({"A": values[:, 0], "B": values[:, 1], TARGET: CHAIN_LEVEL + CHAIN_SCALE * values[:, 2]},
                        index=pd.Index(dates, name="date"))


def synth(preset: str, n: int, seed: int) -> pd.DataFrame:
    if n < 3:
        raise ConfigError(f"Need at least 3 days, got {n}", key="n")

    if preset == GARCH_PRESET:
        return garch_panel(n, seed)

    if preset == CHAIN_PRESET:
        return chain_panel(n, seed)

    raise ConfigError(f"Unknown preset '{preset}', expected one of {list(PRESETS)}", key="preset")


def write_synth(preset: str, n: int, seed: int, out: typing.Union[str, pathlib.Path]) -> pathlib.Path:
    frame = synth(preset, n, seed)
    path = pathlib.Path(out)

    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)

    frame.to_csv(path, date_format="%Y-%m-%d", float_format="%.10g", lineterminator="\n")

    logger.info(f"Wrote {n} days of the '{preset}' preset to {path}")

    return path
