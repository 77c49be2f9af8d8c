import dataclasses
import datetime
import json
import pathlib
import typing

from .. import distributions as dists
from .. import volatility as vol
from ..data import PanelSchema
from ..dbn import ALGORITHMS
from ..risk import METRICS


HS = "hs"
DELTA_NORMAL = "delta_normal"

PARAMETRIC_MODELS = tuple(f"{family}_{kind}" for family in vol.FAMILIES for kind in dists.DISTRIBUTION_KINDS)
DBN_MODELS = tuple(f"dbn_{algorithm}" for algorithm in ALGORITHMS)

ALL_MODELS = (HS, DELTA_NORMAL) + PARAMETRIC_MODELS + DBN_MODELS


class ConfigError(Exception):

    def __init__(self, message: str, key: typing.Optional[str] = None) -> None:
        super().__init__(message)
        self.message = message
        self.key = key


@dataclasses.dataclass
class PanelSettings:
    path: str
    target_column: str
    date_column: typing.Optional[str] = None
    columns: typing.Optional[typing.List[str]] = None
    classifications: typing.Dict[str, str] = dataclasses.field(default_factory=dict)

    @property
    def schema(self) -> PanelSchema:
        return PanelSchema(self.target_column, self.date_column, self.columns, dict(self.classifications))


@dataclasses.dataclass
class DbnSettings:
    ci_alpha: float = 0.05
    extra_ci_alphas: typing.List[float] = dataclasses.field(default_factory=lambda: [0.01, 0.10])
    max_cond_size: int = 3
    relearn_every: int = 21

    @property
    def ci_alphas(self) -> typing.Tuple[float, ...]:
        return tuple(sorted({self.ci_alpha, *self.extra_ci_alphas}))


@dataclasses.dataclass
class BacktestSettings:
    mc_trials: int = 1000
    de_lags: int = 1
    significance: float = 0.025
    de_monte_carlo: bool = False


@dataclasses.dataclass
class CalibrationSettings:
    restarts: int = 3
    max_iter: int = 4000
    warm_start: bool = True


@dataclasses.dataclass
class StudyConfig:
    panel: PanelSettings
    seed: typing.Optional[int] = None
    start_date: typing.Optional[str] = None
    end_date: typing.Optional[str] = None
    window_len: int = 1264
    horizon_days: int = 10
    alpha: float = 0.025
    portfolio_value: float = 1.0
    max_leading_fraction: float = 0.10
    models: typing.List[str] = dataclasses.field(default_factory=lambda: list(ALL_MODELS))
    metrics: typing.List[str] = dataclasses.field(default_factory=lambda: list(METRICS))
    dbn: DbnSettings = dataclasses.field(default_factory=DbnSettings)
    backtests: BacktestSettings = dataclasses.field(default_factory=BacktestSettings)
    calibration: CalibrationSettings = dataclasses.field(default_factory=CalibrationSettings)
    out_dir: str = "out"
    export_stressed_members: bool = False
    export_structures: bool = False

    @property
    def uses_dbn(self) -> bool:
        return any(m in DBN_MODELS for m in self.models)


_SECTIONS = {
    "panel": PanelSettings,
    "dbn": DbnSettings,
    "backtests": BacktestSettings,
    "calibration": CalibrationSettings,
}


def from_dict(raw: typing.Mapping[str, typing.Any]) -> StudyConfig:
    if not isinstance(raw, typing.Mapping):
        raise ConfigError("Config must be a JSON object")

    known = {f.name for f in dataclasses.fields(StudyConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"Unknown config key '{unknown[0]}'", key=unknown[0])

    if "panel" not in raw:
        raise ConfigError("Missing 'panel' section", key="panel")

    values = dict(raw)
    for name, section in _SECTIONS.items():
        if name in values:
            values[name] = _section(name, section, values[name])

    return StudyConfig(**values)


def _section(name, section, raw):
    if not isinstance(raw, typing.Mapping):
        raise ConfigError(f"'{name}' must be an object", key=name)

    known = {f.name for f in dataclasses.fields(section)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"Unknown config key '{name}.{unknown[0]}'", key=f"{name}.{unknown[0]}")

    try:
        return section(**raw)
    except TypeError as e:
        raise ConfigError(f"Incomplete '{name}' section: {e}", key=name)


def to_dict(config: StudyConfig) -> typing.Dict[str, typing.Any]:
    return dataclasses.asdict(config)


def load_config(path: typing.Union[str, pathlib.Path]) -> StudyConfig:
    path = pathlib.Path(path)

    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"Cannot read config '{path}': {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config '{path}' is not valid JSON: {e}")

    return from_dict(raw)


def override(config: StudyConfig,
             models: typing.Optional[typing.Sequence[str]] = None,
             metrics: typing.Optional[typing.Sequence[str]] = None,
             seed: typing.Optional[int] = None,
             out_dir: typing.Optional[str] = None) -> StudyConfig:
    changes = {}

    if models is not None:
        changes["models"] = list(models)
    if metrics is not None:
        changes["metrics"] = list(metrics)
    if seed is not None:
        changes["seed"] = seed
    if out_dir is not None:
        changes["out_dir"] = out_dir

    return dataclasses.replace(config, **changes)


def validate_config(config: StudyConfig) -> None:
    if config.seed is None:
        raise ConfigError("A seed is required", key="seed")

    if not isinstance(config.seed, int) or isinstance(config.seed, bool) or config.seed < 0:
        raise ConfigError(f"Seed must be a non-negative integer, got {config.seed!r}", key="seed")

    if not 0 < config.alpha < 0.5:
        raise ConfigError(f"alpha must lie in (0, 0.5), got {config.alpha}", key="alpha")

    if config.horizon_days < 1:
        raise ConfigError(f"horizon_days must be positive, got {config.horizon_days}", key="horizon_days")

    if config.window_len <= config.horizon_days or config.window_len * config.alpha < 1:
        raise ConfigError(f"window_len {config.window_len} is too short for horizon "
                          f"{config.horizon_days} at alpha {config.alpha}", key="window_len")

    if config.portfolio_value <= 0:
        raise ConfigError(f"portfolio_value must be positive, got {config.portfolio_value}", key="portfolio_value")

    if not 0 <= config.max_leading_fraction < 1:
        raise ConfigError(f"max_leading_fraction must lie in [0, 1), got {config.max_leading_fraction}",
                          key="max_leading_fraction")

    if not config.models:
        raise ConfigError("No models selected", key="models")

    for model in config.models:
        if model not in ALL_MODELS:
            raise ConfigError(f"Unknown model '{model}'", key="models")

    if len(set(config.models)) != len(config.models):
        raise ConfigError("Duplicate model ids", key="models")

    if not config.metrics or any(m not in METRICS for m in config.metrics):
        raise ConfigError(f"Metrics must be drawn from {list(METRICS)}, got {config.metrics}", key="metrics")

    for alpha in config.dbn.ci_alphas:
        if not 0 < alpha < 1:
            raise ConfigError(f"CI significance {alpha} must lie in (0, 1)", key="dbn.ci_alpha")

    if config.dbn.max_cond_size < 0:
        raise ConfigError("dbn.max_cond_size must be non-negative", key="dbn.max_cond_size")

    if config.dbn.relearn_every < 1:
        raise ConfigError("dbn.relearn_every must be positive", key="dbn.relearn_every")

    if config.backtests.mc_trials < 100:
        raise ConfigError("backtests.mc_trials must be at least 100", key="backtests.mc_trials")

    if config.backtests.de_lags < 1:
        raise ConfigError("backtests.de_lags must be positive", key="backtests.de_lags")

    if not 0 < config.backtests.significance < 1:
        raise ConfigError("backtests.significance must lie in (0, 1)", key="backtests.significance")

    if config.calibration.restarts < 1 or config.calibration.max_iter < 1:
        raise ConfigError("calibration needs at least one restart and iteration", key="calibration")

    for key in ("start_date", "end_date"):
        value = getattr(config, key)
        if value is not None:
            try:
                _parse_date(value)
            except ValueError:
                raise ConfigError(f"{key} '{value}' is not an ISO date", key=key)

    if config.start_date and config.end_date and _parse_date(config.start_date) > _parse_date(config.end_date):
        raise ConfigError("start_date is after end_date", key="start_date")


def _parse_date(value: str) -> datetime.date:
    return datetime.date.fromisoformat(value)
