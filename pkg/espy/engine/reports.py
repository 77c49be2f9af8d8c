import json
import logging
import math
import pathlib
import typing

import pandas as pd

from .. import __version__
from .config import to_dict
from .study import StudyResult


logger = logging.getLogger("engine")


FORECAST_COLUMNS = ["date", "model", "metric", "var", "es", "realized", "var_breach", "es_breach", "pit"]
SCORE_COLUMNS = ["model", "metric", "mae", "rmse", "mape_pct", "n_obs", "n_smape_substitutions"]
FAILURE_COLUMNS = ["date", "model", "metric", "error_type", "message"]
BREACH_COLUMNS = ["model", "metric", "var_breaches", "es_breaches", "n_obs"]


def emit_reports(result: StudyResult, out_dir: typing.Union[str, pathlib.Path]) -> typing.List[pathlib.Path]:
    """Writes every study artifact under ``out_dir`` and returns the paths."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    written = [
        _write_csv(out / "forecasts.csv", forecast_rows(result), FORECAST_COLUMNS),
        _write_json(out / "backtests.json", backtest_rows(result)),
        _write_csv(out / "scores.csv", score_rows(result), SCORE_COLUMNS),
        _write_csv(out / "failures.csv", failure_rows(result), FAILURE_COLUMNS),
        _write_csv(out / "breaches.csv", breach_rows(result), BREACH_COLUMNS),
        _write_json(out / "descriptive_stats.json", result.stats.as_dict() if result.stats else {}),
        _write_json(out / "run_manifest.json", manifest(result)),
    ]

    if result.config.export_stressed_members:
        rows = [{"forecast_date": _date(w.forecast_date),
                 "n_members": len(w),
                 "member_dates": " ".join(_date(d) for d in w.member_dates)}
                for w in result.stressed_windows]
        written.append(_write_csv(out / "stressed_windows.csv", rows, ["forecast_date", "n_members", "member_dates"]))

    if result.config.export_structures:
        folder = out / "structures"
        folder.mkdir(exist_ok=True)

        for model_id, date, structure in result.structures:
            path = folder / f"{model_id}_{_date(date)}.txt"
            path.write_text(structure.to_arc_list())
            written.append(path)

    logger.info(f"Wrote {len(written)} files to {out}")

    return written


def forecast_rows(result: StudyResult) -> typing.List[typing.Dict[str, typing.Any]]:
    return [{
        "date": _date(r.date),
        "model": r.model_id,
        "metric": r.metric_id,
        "var": r.var_forecast,
        "es": r.es_forecast,
        "realized": r.realized_h_return,
        "var_breach": int(r.var_breach),
        "es_breach": int(r.es_breach),
        "pit": r.pit,
    } for r in result.records]


def backtest_rows(result: StudyResult) -> typing.List[typing.Dict[str, typing.Any]]:
    rows = []

    for (model_id, metric_id), outcomes in result.outcomes.items():
        for outcome in outcomes:
            row = {"model": model_id, "metric": metric_id}
            row.update({k: _finite(v) for k, v in outcome.as_dict().items()})
            rows.append(row)

    return rows


def score_rows(result: StudyResult) -> typing.List[typing.Dict[str, typing.Any]]:
    ordered = sorted(result.scores, key=lambda s: (result.config.metrics.index(s.metric_id), s.sort_key))

    return [{
        "model": s.model_id,
        "metric": s.metric_id,
        "mae": s.mae,
        "rmse": s.rmse,
        "mape_pct": s.mape_pct,
        "n_obs": s.n_obs,
        "n_smape_substitutions": s.n_smape_substitutions,
    } for s in ordered]


def failure_rows(result: StudyResult) -> typing.List[typing.Dict[str, typing.Any]]:
    return [{
        "date": _date(f.date) if f.date is not None else "",
        "model": f.model_id,
        "metric": f.metric_id or "",
        "error_type": f.error_type,
        "message": f.message,
    } for f in result.failures]


def breach_rows(result: StudyResult) -> typing.List[typing.Dict[str, typing.Any]]:
    rows = []

    for model_id in result.config.models:
        for metric_id in result.config.metrics:
            records = result.records_for(model_id, metric_id)
            rows.append({
                "model": model_id,
                "metric": metric_id,
                "var_breaches": sum(r.var_breach for r in records),
                "es_breaches": sum(r.es_breach for r in records),
                "n_obs": len(records),
            })

    return rows


def manifest(result: StudyResult) -> typing.Dict[str, typing.Any]:
    panel = result.panel

    return {
        "version": __version__,
        "seed": result.config.seed,
        "config": to_dict(result.config),
        "panel": {
            "rows": len(panel),
            "columns": panel.columns,
            "classifications": dict(result.config.panel.classifications),
            "leading_gaps": panel.leading_gaps,
            "flagged_columns": list(panel.flagged_columns),
        },
        "out_of_sample": {
            "n_dates": len(result.dates),
            "first": _date(result.dates[0]) if result.dates else None,
            "last": _date(result.dates[-1]) if result.dates else None,
        },
        "n_records": len(result.records),
        "n_failures": len(result.failures),
    }


def _write_csv(path: pathlib.Path, rows, columns) -> pathlib.Path:
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path


def _write_json(path: pathlib.Path, payload) -> pathlib.Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _date(value) -> str:
    return pd.Timestamp(value).strftime("%Y-%m-%d")


def _finite(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None

    return value
