"""Benchmark orchestration: config parsing, model x horizon runs, reports."""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import arma as arma_mod
from . import metrics as metrics_mod
from . import recurrent as rnn_mod
from .market_data import (
    MarketDataError,
    TimeSeriesTable,
    fetch_ohlcv,
    normalize_column,
    parse_ohlcv_csv,
    select_series,
    table_to_csv,
)
from .preprocess import Horizon, fit_minmax, horizon_split, make_windows
from .stationarity import AdfResult, adf_test

MODEL_NAMES = ("arma", "arima", "lstm", "gru")
HORIZON_NAMES = ("short", "medium", "long")
FORMAT_NAMES = ("json", "csv")


class ConfigError(ValueError):
    """Malformed benchmark configuration."""


@dataclass(frozen=True)
class ArmaHyperparams:
    p_max: int = 3
    q_max: int = 3


@dataclass(frozen=True)
class ArimaHyperparams:
    p_max: int = 3
    q_max: int = 3
    d_choices: tuple[int, ...] = (0, 1)


@dataclass(frozen=True)
class RnnHyperparams:
    hidden: int = 64
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    grad_clip_norm: float = 5.0


@dataclass(frozen=True)
class BenchConfig:
    """Everything a benchmark run needs; the seed is mandatory."""

    seed: int
    models: tuple[str, ...]
    horizons: tuple[str, ...]
    csv: str | None = None
    endpoint: str | None = None
    symbol: str | None = None
    start: str | None = None
    end: str | None = None
    column: str = "close"
    train_fraction: float = 0.8
    window_length: int = 30
    output_dir: str = "bench_out"
    formats: tuple[str, ...] = ("json", "csv")
    arma: ArmaHyperparams = field(default_factory=ArmaHyperparams)
    arima: ArimaHyperparams = field(default_factory=ArimaHyperparams)
    lstm: RnnHyperparams = field(default_factory=RnnHyperparams)
    gru: RnnHyperparams = field(default_factory=RnnHyperparams)
    audit_leakage: bool = False


_SECTION_KEYS = {
    "data": ("csv", "endpoint", "symbol", "start", "end", "column"),
    "run": (
        "models",
        "horizons",
        "seed",
        "train_fraction",
        "window_length",
        "output_dir",
        "formats",
        "audit_leakage",
    ),
    "arma": ("p_max", "q_max"),
    "arima": ("p_max", "q_max", "d_choices"),
    "lstm": (
        "hidden",
        "epochs",
        "batch_size",
        "learning_rate",
        "beta1",
        "beta2",
        "eps_adam",
        "grad_clip_norm",
    ),
    "gru": (
        "hidden",
        "epochs",
        "batch_size",
        "learning_rate",
        "beta1",
        "beta2",
        "eps_adam",
        "grad_clip_norm",
    ),
}


def _split_list(raw: str) -> tuple[str, ...]:
    return tuple(item.strip().lower() for item in raw.split(",") if item.strip())


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: invalid {kind.__name__} value {raw!r}"
        ) from None


def parse_config_text(text: str) -> BenchConfig:
    """Parse the INI-style benchmark configuration.

    Unknown sections or keys are hard errors (typo protection); omitted keys
    take the documented defaults.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None

    values: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[section][key] = raw

    data = values.get("data", {})
    run = values.get("run", {})

    if "seed" not in run:
        raise ConfigError("[run] seed is required (reproducibility is mandatory)")
    if "models" not in run:
        raise ConfigError("[run] models is required")
    if "horizons" not in run:
        raise ConfigError("[run] horizons is required")

    models = _split_list(run["models"])
    horizons = _split_list(run["horizons"])
    if not models:
        raise ConfigError("[run] models: need at least one model")
    if not horizons:
        raise ConfigError("[run] horizons: need at least one horizon")
    for m in models:
        if m not in MODEL_NAMES:
            raise ConfigError(f"[run] models: unknown model {m!r}")
    for h in horizons:
        if h not in HORIZON_NAMES:
            raise ConfigError(f"[run] horizons: unknown horizon {h!r}")
    formats = _split_list(run.get("formats", "json, csv"))
    for f in formats:
        if f not in FORMAT_NAMES:
            raise ConfigError(f"[run] formats: unknown format {f!r}")

    csv_path = data.get("csv")
    endpoint = data.get("endpoint")
    if csv_path is None and endpoint is None:
        raise ConfigError("[data] needs either csv or endpoint")
    if endpoint is not None and not data.get("symbol"):
        raise ConfigError("[data] symbol is required with endpoint")

    column = data.get("column", "close")
    try:
        column = normalize_column(column)
    except MarketDataError as exc:
        raise ConfigError(f"[data] column: {exc}") from None

    def hp_section(name: str, cls, casts: dict):
        raw = values.get(name, {})
        kwargs = {}
        for key, raw_value in raw.items():
            kwargs[key] = casts[key](name, key, raw_value)
        return cls(**kwargs)

    int_cast = lambda s, k, v: _convert(s, k, v, int)
    float_cast = lambda s, k, v: _convert(s, k, v, float)

    def d_choices_cast(s, k, v):
        parts = _split_list(v)
        if not parts:
            raise ConfigError(f"[{s}] {k}: empty list")
        return tuple(_convert(s, k, part, int) for part in parts)

    rnn_casts = {
        "hidden": int_cast,
        "epochs": int_cast,
        "batch_size": int_cast,
        "learning_rate": float_cast,
        "beta1": float_cast,
        "beta2": float_cast,
        "eps_adam": float_cast,
        "grad_clip_norm": float_cast,
    }
    config = BenchConfig(
        seed=_convert("run", "seed", run["seed"], int),
        models=models,
        horizons=horizons,
        csv=csv_path,
        endpoint=endpoint,
        symbol=data.get("symbol"),
        start=data.get("start"),
        end=data.get("end"),
        column=column,
        train_fraction=_convert("run", "train_fraction", run.get("train_fraction", "0.8"), float),
        window_length=_convert("run", "window_length", run.get("window_length", "30"), int),
        output_dir=run.get("output_dir", "bench_out"),
        formats=formats,
        arma=hp_section("arma", ArmaHyperparams, {"p_max": int_cast, "q_max": int_cast}),
        arima=hp_section(
            "arima",
            ArimaHyperparams,
            {"p_max": int_cast, "q_max": int_cast, "d_choices": d_choices_cast},
        ),
        lstm=hp_section("lstm", RnnHyperparams, rnn_casts),
        gru=hp_section("gru", RnnHyperparams, rnn_casts),
        audit_leakage=_convert(
            "run", "audit_leakage", run.get("audit_leakage", "false"), bool
        ),
    )
    if not 0.0 < config.train_fraction < 1.0:
        raise ConfigError("[run] train_fraction must lie in (0, 1)")
    if config.window_length < 1:
        raise ConfigError("[run] window_length must be >= 1")
    return config


def load_config(path: str | Path) -> BenchConfig:
    """Read and validate a benchmark config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def emit_config(config: BenchConfig) -> str:
    """Serialize the effective configuration; reloading it reproduces the
    same BenchConfig."""
    out = io.StringIO()

    def section(name: str, pairs):
        out.write(f"[{name}]\n")
        for key, value in pairs:
            if value is None:
                continue
            if isinstance(value, (tuple, list)):
                value = ", ".join(str(v) for v in value)
            out.write(f"{key} = {value}\n")
        out.write("\n")

    section(
        "data",
        [
            ("csv", config.csv),
            ("endpoint", config.endpoint),
            ("symbol", config.symbol),
            ("start", config.start),
            ("end", config.end),
            ("column", config.column),
        ],
    )
    section(
        "run",
        [
            ("models", config.models),
            ("horizons", config.horizons),
            ("seed", config.seed),
            ("train_fraction", repr(config.train_fraction)),
            ("window_length", config.window_length),
            ("output_dir", config.output_dir),
            ("formats", config.formats),
            ("audit_leakage", config.audit_leakage),
        ],
    )
    section("arma", [("p_max", config.arma.p_max), ("q_max", config.arma.q_max)])
    section(
        "arima",
        [
            ("p_max", config.arima.p_max),
            ("q_max", config.arima.q_max),
            ("d_choices", config.arima.d_choices),
        ],
    )
    for name in ("lstm", "gru"):
        hp: RnnHyperparams = getattr(config, name)
        section(
            name,
            [
                ("hidden", hp.hidden),
                ("epochs", hp.epochs),
                ("batch_size", hp.batch_size),
                ("learning_rate", repr(hp.learning_rate)),
                ("beta1", repr(hp.beta1)),
                ("beta2", repr(hp.beta2)),
                ("eps_adam", repr(hp.eps_adam)),
                ("grad_clip_norm", repr(hp.grad_clip_norm)),
            ],
        )
    return out.getvalue()


def load_table(config: BenchConfig) -> TimeSeriesTable:
    """Materialize the configured data source as a table."""
    if config.csv is not None:
        path = Path(config.csv)
        if not path.exists():
            raise ConfigError(f"data file not found: {path}")
        return parse_ohlcv_csv(path.read_text(), symbol=path.stem)
    return fetch_ohlcv(
        config.symbol, config.start or "", config.end or "", base_url=config.endpoint
    )


def derive_cell_seed(seed: int, model: str, horizon: str) -> int:
    """Stable per-cell seed; independent of execution order and platform."""
    digest = hashlib.sha256(f"{seed}|{model}|{horizon}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


@dataclass(eq=False)
class CellResult:
    model: str
    horizon: str
    metrics: metrics_mod.MetricReport | None
    seconds: float
    detail: dict
    trace_dates: tuple = ()
    trace_actual: np.ndarray | None = None
    trace_predicted: np.ndarray | None = None
    error: str | None = None


@dataclass(eq=False)
class BenchmarkReport:
    config: BenchConfig
    dataset_sha256: str
    adf: AdfResult
    cells: list[CellResult]

    @property
    def failures(self) -> list[CellResult]:
        return [c for c in self.cells if c.error is not None]


def _run_arma_like(config: BenchConfig, split, model: str):
    train_series = split.train
    if model == "arma":
        hp = config.arma
        p, q, aic = arma_mod.select_pq(train_series, hp.p_max, hp.q_max)
        fitted = arma_mod.fit_arma(train_series, p, q)
        d_stationary = None
    else:
        hp = config.arima
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", arma_mod.StationarityWarning)
            selection = arma_mod.select_order(
                train_series, hp.p_max, hp.q_max, hp.d_choices
            )
        p, d, q = selection
        fitted = arma_mod.fit_arima(train_series, p, d, q)
        d_stationary = selection.d_stationary
    predictions = arma_mod.rolling_one_step(fitted, split.train, split.test)
    detail = {
        "order": list(fitted.order),
        "ar": list(fitted.params.ar),
        "ma": list(fitted.params.ma),
        "intercept": fitted.params.intercept,
        "aic": fitted.aic,
        "converged": fitted.converged,
    }
    if d_stationary is not None:
        detail["d_stationary"] = d_stationary
    return predictions, detail


def _run_recurrent(config: BenchConfig, split, model: str, cell_seed: int):
    hp: RnnHyperparams = getattr(config, model)
    w = config.window_length
    scaler = fit_minmax(split.train)
    train_scaled = scaler.transform(split.train.values)
    windows = make_windows(train_scaled, w)
    net = rnn_mod.create_network(model, hp.hidden, input_size=1, seed=cell_seed)
    train_config = rnn_mod.TrainConfig(
        epochs=hp.epochs,
        batch_size=hp.batch_size,
        learning_rate=hp.learning_rate,
        beta1=hp.beta1,
        beta2=hp.beta2,
        eps_adam=hp.eps_adam,
        grad_clip_norm=hp.grad_clip_norm,
        seed=cell_seed,
    )
    result = rnn_mod.train(net, windows, train_config)

    full_scaled = np.concatenate(
        [train_scaled, scaler.transform(split.test.values)]
    )
    n_train = len(train_scaled)
    n_test = len(split.test.values)
    test_windows = np.empty((n_test, w))
    for j in range(n_test):
        target_index = n_train + j
        if config.audit_leakage:
            assert target_index - w >= 0 and target_index <= len(full_scaled)
        test_windows[j] = full_scaled[target_index - w : target_index]
    predictions = scaler.inverse(rnn_mod.forward_batch(result.network, test_windows))
    detail = {
        "hidden": hp.hidden,
        "epochs": hp.epochs,
        "batch_size": hp.batch_size,
        "learning_rate": hp.learning_rate,
        "grad_clip_norm": hp.grad_clip_norm,
        "window_length": w,
        "cell_seed": cell_seed,
        "final_training_loss": result.loss_history[-1],
        "scaler": {"lo": scaler.lo, "hi": scaler.hi},
    }
    if config.audit_leakage:
        detail["leakage_audit"] = "ok"
    return predictions, detail


def run_benchmark(config: BenchConfig, table: TimeSeriesTable) -> BenchmarkReport:
    """Run every configured (model, horizon) cell and assemble the report.

    Cell failures are captured as failure records; the run continues.
    """
    series = select_series(table, config.column)
    adf = adf_test(series)
    digest = hashlib.sha256(table_to_csv(table).encode()).hexdigest()

    cells: list[CellResult] = []
    for model in config.models:
        for horizon in config.horizons:
            start = time.perf_counter()
            cell_seed = derive_cell_seed(config.seed, model, horizon)
            try:
                split = horizon_split(
                    table, horizon, config.train_fraction, config.column
                )
                if model in ("arma", "arima"):
                    predictions, detail = _run_arma_like(config, split, model)
                else:
                    predictions, detail = _run_recurrent(
                        config, split, model, cell_seed
                    )
                report = metrics_mod.evaluate(predictions, split.test.values)
                cells.append(
                    CellResult(
                        model=model,
                        horizon=horizon,
                        metrics=report,
                        seconds=time.perf_counter() - start,
                        detail=detail,
                        trace_dates=split.test.dates,
                        trace_actual=split.test.values,
                        trace_predicted=np.asarray(predictions),
                    )
                )
            except Exception as exc:  # noqa: BLE001 - cell isolation by design
                cells.append(
                    CellResult(
                        model=model,
                        horizon=horizon,
                        metrics=None,
                        seconds=time.perf_counter() - start,
                        detail={},
                        error=f"{type(exc).__name__}: {exc}",
                    )
                )
    return BenchmarkReport(
        config=config, dataset_sha256=digest, adf=adf, cells=cells
    )


def _config_to_dict(config: BenchConfig) -> dict:
    raw = asdict(config)
    for key in ("models", "horizons", "formats"):
        raw[key] = list(raw[key])
    raw["arima"]["d_choices"] = list(raw["arima"]["d_choices"])
    return raw


def _metrics_to_dict(report: metrics_mod.MetricReport | None) -> dict | None:
    if report is None:
        return None
    return {
        "r2": report.r2,
        "rmse": report.rmse,
        "mse": report.mse,
        "mae": report.mae,
        "mape_percent": report.mape_percent,
        "n": report.n,
    }


def _trace_filename(cell: CellResult) -> str:
    return f"trace_{cell.model}_{cell.horizon}.csv"


def report_to_json(report: BenchmarkReport) -> str:
    """The normative report.json document (sorted keys, stable floats)."""
    payload = {
        "meta": {
            "config": _config_to_dict(report.config),
            "dataset_sha256": report.dataset_sha256,
            "adf": {
                "statistic": report.adf.statistic,
                "p_value": report.adf.p_value,
                "lags": report.adf.lags_used,
            },
        },
        "cells": [
            {
                "model": cell.model,
                "horizon": cell.horizon,
                "metrics": _metrics_to_dict(cell.metrics),
                "seconds": cell.seconds,
                "detail": cell.detail,
                "trace_file": None if cell.error else _trace_filename(cell),
                "error": cell.error,
            }
            for cell in report.cells
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def summary_csv(report: BenchmarkReport) -> str:
    """One row per cell: model, horizon, r2, rmse, mse, mae, mape."""
    lines = ["model,horizon,r2,rmse,mse,mae,mape"]
    for cell in report.cells:
        if cell.metrics is None:
            lines.append(f"{cell.model},{cell.horizon},,,,,")
            continue
        m = cell.metrics
        mape_text = "" if m.mape_percent is None else repr(m.mape_percent)
        lines.append(
            f"{cell.model},{cell.horizon},{m.r2!r},{m.rmse!r},{m.mse!r},"
            f"{m.mae!r},{mape_text}"
        )
    return "\n".join(lines) + "\n"


def trace_csv(cell: CellResult) -> str:
    lines = ["date,actual,predicted"]
    for day, actual, predicted in zip(
        cell.trace_dates, cell.trace_actual, cell.trace_predicted
    ):
        lines.append(f"{day.isoformat()},{float(actual)!r},{float(predicted)!r}")
    return "\n".join(lines) + "\n"


def emit_report(
    report: BenchmarkReport,
    formats: tuple[str, ...] | None = None,
    out_dir: str | Path | None = None,
) -> list[Path]:
    """Write report.json / summary.csv / per-cell traces into ``out_dir``."""
    formats = formats if formats is not None else report.config.formats
    out = Path(out_dir if out_dir is not None else report.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "json" in formats:
        path = out / "report.json"
        path.write_text(report_to_json(report))
        written.append(path)
    if "csv" in formats:
        path = out / "summary.csv"
        path.write_text(summary_csv(report))
        written.append(path)
    for cell in report.cells:
        if cell.error is None:
            path = out / _trace_filename(cell)
            path.write_text(trace_csv(cell))
            written.append(path)
    return written
