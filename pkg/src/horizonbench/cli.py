"""Command-line interface.

Exit codes: 0 success, 1 config/input error, 2 benchmark finished but some
cells failed (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import arma as arma_mod
from . import recurrent as rnn_mod
from .bench import (
    ConfigError,
    emit_report,
    load_config,
    load_table,
    run_benchmark,
    summary_csv,
)
from .market_data import (
    FetchError,
    MarketDataError,
    fetch_ohlcv,
    parse_ohlcv_csv,
    select_series,
    summarize,
    table_to_csv,
)
from .preprocess import PreprocessError, fit_minmax, make_windows
from .stationarity import (
    StationarityError,
    adf_test,
    decompose,
    decomposition_to_csv,
)

_INPUT_ERRORS = (
    MarketDataError,
    FetchError,
    PreprocessError,
    StationarityError,
    arma_mod.ArmaError,
    rnn_mod.RecurrentError,
    ConfigError,
    OSError,
)


def _read_table(path: str):
    return parse_ohlcv_csv(Path(path).read_text(), symbol=Path(path).stem)


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_ingest(args) -> int:
    table = _read_table(args.csv)
    first = table.bars[0].date.isoformat() if len(table) else "-"
    last = table.bars[-1].date.isoformat() if len(table) else "-"
    print(f"{len(table)} rows, {first} .. {last}")
    return 0


def _cmd_fetch(args) -> int:
    table = fetch_ohlcv(args.symbol, args.start, args.end, base_url=args.base_url)
    _write_or_print(table_to_csv(table), args.out)
    return 0


def _cmd_summary(args) -> int:
    stats = summarize(_read_table(args.csv))
    header = f"{'column':<10}{'count':>7}{'mean':>12}{'std':>12}{'min':>12}{'q25':>12}{'q50':>12}{'q75':>12}{'max':>12}"
    print(header)
    for name, col in stats.columns.items():
        print(
            f"{name:<10}{col.count:>7}{col.mean:>12.4f}{col.std:>12.4f}"
            f"{col.min:>12.4f}{col.q25:>12.4f}{col.q50:>12.4f}"
            f"{col.q75:>12.4f}{col.max:>12.4f}"
        )
    if stats.degenerate:
        print("note: single-row table, std reported as 0")
    return 0


def _cmd_adf(args) -> int:
    series = select_series(_read_table(args.csv), args.column)
    result = adf_test(series, max_lag=args.max_lag)
    print(f"ADF statistic: {result.statistic:.4f}")
    print(f"p-value (interpolated): {result.p_value:.4f}")
    print(f"lags used: {result.lags_used}")
    print(
        f"critical values: 1% {result.crit_1pct}, 5% {result.crit_5pct}, "
        f"10% {result.crit_10pct}"
    )
    verdict = "reject" if result.reject_at_5pct else "fail to reject"
    print(f"unit-root null at 5%: {verdict}")
    return 0


def _cmd_decompose(args) -> int:
    series = select_series(_read_table(args.csv), args.column)
    result = decompose(series, args.window)
    _write_or_print(decomposition_to_csv(result), args.out)
    return 0


def _cmd_fit_arima(args) -> int:
    series = select_series(_read_table(args.csv), args.column)
    if args.auto:
        selection = arma_mod.select_order(series)
        p, d, q = selection
    elif args.order:
        try:
            p, d, q = (int(part) for part in args.order.split(","))
        except ValueError:
            raise ConfigError(f"--order expects p,d,q, got {args.order!r}") from None
    else:
        raise ConfigError("provide --order p,d,q or --auto")
    model = arma_mod.fit_arima(series, p, d, q)
    text = arma_mod.model_to_json(model)
    if args.out:
        Path(args.out).write_text(text)
    print(
        f"ARIMA({p},{d},{q}) css={model.resid.css:.6g} aic={model.aic:.4f} "
        f"converged={model.converged}"
    )
    return 0


def _cmd_train_rnn(args) -> int:
    seed = args.seed if args.seed is not None else 0
    series = select_series(_read_table(args.csv), args.column)
    scaler = fit_minmax(series)
    windows = make_windows(scaler.transform(series.values), args.window)
    net = rnn_mod.create_network(args.cell, args.hidden, input_size=1, seed=seed)
    config = rnn_mod.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=seed,
    )
    result = rnn_mod.train(net, windows, config)
    if args.out:
        Path(args.out).write_text(rnn_mod.network_to_json(result.network))
    print(
        f"{args.cell} hidden={args.hidden} epochs={args.epochs} "
        f"final_loss={result.loss_history[-1]:.6g}"
    )
    return 0


def _cmd_benchmark(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    table = load_table(config)
    report = run_benchmark(config, table)
    written = emit_report(report)
    for path in written:
        print(f"wrote {path}")
    if report.failures:
        for cell in report.failures:
            print(f"FAILED {cell.model}/{cell.horizon}: {cell.error}", file=sys.stderr)
        return 2
    return 0


def _cmd_report(args) -> int:
    raw = json.loads(Path(args.report).read_text())
    if args.format == "json":
        print(json.dumps(raw, indent=2, sort_keys=True))
        return 0
    lines = ["model,horizon,r2,rmse,mse,mae,mape"]
    for cell in raw["cells"]:
        metrics = cell.get("metrics")
        if not metrics:
            lines.append(f"{cell['model']},{cell['horizon']},,,,,")
            continue
        mape = metrics.get("mape_percent")
        mape_text = "" if mape is None else repr(mape)
        lines.append(
            f"{cell['model']},{cell['horizon']},{metrics['r2']!r},"
            f"{metrics['rmse']!r},{metrics['mse']!r},{metrics['mae']!r},{mape_text}"
        )
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="horizonbench",
        description="Stock-price forecasting benchmark: LSTM, GRU, ARMA, ARIMA.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=None, help="random seed")
        return p

    p = add("ingest", _cmd_ingest, help="parse and validate an OHLCV CSV")
    p.add_argument("csv")

    p = add("fetch", _cmd_fetch, help="download OHLCV CSV from an endpoint")
    p.add_argument("--symbol", required=True)
    p.add_argument("--start", required=True)
    p.add_argument("--end", required=True)
    p.add_argument("--base-url", default=None)
    p.add_argument("--out", default=None)

    p = add("summary", _cmd_summary, help="descriptive statistics per column")
    p.add_argument("csv")

    p = add("adf", _cmd_adf, help="augmented Dickey-Fuller stationarity test")
    p.add_argument("csv")
    p.add_argument("--column", default="close")
    p.add_argument("--max-lag", type=int, default=None)

    p = add("decompose", _cmd_decompose, help="moving-average trend/residual split")
    p.add_argument("csv")
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--column", default="close")
    p.add_argument("--out", default=None)

    p = add("fit-arima", _cmd_fit_arima, help="fit an ARIMA(p,d,q) model")
    p.add_argument("csv")
    p.add_argument("--order", default=None, help="p,d,q")
    p.add_argument("--auto", action="store_true", help="select orders automatically")
    p.add_argument("--column", default="close")
    p.add_argument("--out", default=None, help="write the fitted model as JSON")

    p = add("train-rnn", _cmd_train_rnn, help="train an LSTM or GRU")
    p.add_argument("csv")
    p.add_argument("--cell", choices=("lstm", "gru"), required=True)
    p.add_argument("--column", default="close")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--window", type=int, default=30)
    p.add_argument("--out", default=None, help="write trained weights as JSON")

    p = add("benchmark", _cmd_benchmark, help="run the full model x horizon grid")
    p.add_argument("--config", required=True)

    p = add("report", _cmd_report, help="re-emit a report.json")
    p.add_argument("report")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
