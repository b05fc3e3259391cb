"""OHLCV market data: CSV ingestion, HTTP fetching, validation, summaries."""

from __future__ import annotations

import csv
import io
import os
import time
from dataclasses import dataclass
from datetime import date, datetime

import numpy as np
import requests

CSV_COLUMNS = ("Date", "Open", "High", "Low", "Close", "Adj Close", "Volume")
NUMERIC_COLUMNS = ("Open", "High", "Low", "Close", "Adj Close", "Volume")

#: Environment variable consulted when no explicit base URL is given.
DATA_URL_ENV = "HORIZONBENCH_DATA_URL"

_DATE_FORMATS = ("%Y-%m-%d", "%Y-%m-%d %H:%M:%S")


class MarketDataError(ValueError):
    """Malformed or invariant-violating market data."""


class FetchError(RuntimeError):
    """Remote OHLCV endpoint could not be read."""


@dataclass(frozen=True)
class OhlcvBar:
    """One daily price bar."""

    date: date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: int


@dataclass(frozen=True)
class TimeSeriesTable:
    """Ordered, validated OHLCV bars for one symbol."""

    bars: tuple[OhlcvBar, ...]
    symbol: str = ""

    def __len__(self) -> int:
        return len(self.bars)

    def column(self, name: str) -> np.ndarray:
        """Numeric column by (normalized) name as a float array."""
        attr = normalize_column(name)
        return np.array([getattr(b, attr) for b in self.bars], dtype=float)

    def dates(self) -> tuple[date, ...]:
        return tuple(b.date for b in self.bars)


@dataclass(eq=False)
class Series:
    """A single named value column with a date index."""

    name: str
    dates: tuple[date, ...]
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ColumnStats:
    count: int
    mean: float
    std: float
    min: float
    q25: float
    q50: float
    q75: float
    max: float


@dataclass(frozen=True)
class SummaryStats:
    """Per-column descriptive statistics of a table.

    ``degenerate`` is set when the table has a single row, where the sample
    standard deviation is undefined and reported as 0.
    """

    columns: dict[str, ColumnStats]
    degenerate: bool = False


def normalize_column(name: str) -> str:
    """Map a user-facing column name to a bar attribute name.

    Accepts any casing and either spaces or underscores ("Adj Close",
    "adj_close", ...).

    Raises:
        MarketDataError: if the name is not one of the six numeric columns.
    """
    key = name.strip().lower().replace(" ", "_")
    if key == "adj_close" or key in ("open", "high", "low", "close", "volume"):
        return key
    raise MarketDataError(
        f"unknown column {name!r}; expected one of "
        "Open, High, Low, Close, Adj Close, Volume"
    )


def _parse_date(text: str, row: int) -> date:
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(text.strip(), fmt).date()
        except ValueError:
            continue
    raise MarketDataError(f"row {row}: unparseable date {text!r}")


def _parse_price(text: str, column: str, row: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise MarketDataError(
            f"row {row}: unparseable number {text!r} in column {column}"
        ) from None


def _parse_volume(text: str, row: int) -> int:
    try:
        value = float(text)
    except ValueError:
        raise MarketDataError(
            f"row {row}: unparseable number {text!r} in column Volume"
        ) from None
    if value != int(value):
        raise MarketDataError(f"row {row}: non-integer volume {text!r}")
    return int(value)


def _bar_violation(bar: OhlcvBar) -> str | None:
    if not all(p > 0 for p in (bar.open, bar.high, bar.low, bar.close, bar.adj_close)):
        return "non-positive price"
    if bar.volume < 0:
        return "negative volume"
    if bar.low > bar.high:
        return "low above high"
    if bar.low > min(bar.open, bar.close):
        return "low above open/close"
    if bar.high < max(bar.open, bar.close):
        return "high below open/close"
    return None


def parse_ohlcv_csv(text: str, symbol: str = "") -> TimeSeriesTable:
    """Parse an OHLCV CSV document into a validated table.

    The header must contain Date, Open, High, Low, Close, Adj Close and
    Volume (order- and case-insensitive).  Rows are sorted by date.  Any
    invariant-violating row is rejected outright, reporting its 1-based
    data-row index.

    Raises:
        MarketDataError: missing column, unparseable field, duplicate date,
            or OHLC invariant violation.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MarketDataError("empty document: no header row") from None

    positions: dict[str, int] = {}
    for idx, cell in enumerate(header):
        key = cell.strip().lower()
        for col in CSV_COLUMNS:
            if key == col.lower():
                positions[col] = idx
    missing = [c for c in CSV_COLUMNS if c not in positions]
    if missing:
        raise MarketDataError(f"missing required column(s): {', '.join(missing)}")

    bars: list[OhlcvBar] = []
    seen: dict[date, int] = {}
    for row_num, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) < len(header):
            raise MarketDataError(f"row {row_num}: expected {len(header)} fields")
        day = _parse_date(cells[positions["Date"]], row_num)
        if day in seen:
            raise MarketDataError(
                f"row {row_num}: duplicate date {day.isoformat()} "
                f"(first seen at row {seen[day]})"
            )
        seen[day] = row_num
        bar = OhlcvBar(
            date=day,
            open=_parse_price(cells[positions["Open"]], "Open", row_num),
            high=_parse_price(cells[positions["High"]], "High", row_num),
            low=_parse_price(cells[positions["Low"]], "Low", row_num),
            close=_parse_price(cells[positions["Close"]], "Close", row_num),
            adj_close=_parse_price(cells[positions["Adj Close"]], "Adj Close", row_num),
            volume=_parse_volume(cells[positions["Volume"]], row_num),
        )
        problem = _bar_violation(bar)
        if problem is not None:
            raise MarketDataError(f"row {row_num}: {problem}")
        bars.append(bar)

    bars.sort(key=lambda b: b.date)
    return TimeSeriesTable(bars=tuple(bars), symbol=symbol)


def table_to_csv(table: TimeSeriesTable) -> str:
    """Serialize a table back to the canonical seven-column CSV.

    Dates are emitted as YYYY-MM-DD; floats use shortest round-trip repr, so
    parse(table_to_csv(parse(text))) reproduces the same table.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for bar in table.bars:
        writer.writerow(
            [
                bar.date.isoformat(),
                repr(bar.open),
                repr(bar.high),
                repr(bar.low),
                repr(bar.close),
                repr(bar.adj_close),
                bar.volume,
            ]
        )
    return out.getvalue()


def fetch_ohlcv(
    symbol: str,
    start: str,
    end: str,
    base_url: str | None = None,
    retries: int = 3,
    backoff: float = 0.5,
    timeout: float = 10.0,
) -> TimeSeriesTable:
    """Fetch OHLCV CSV from ``GET {base}/{symbol}?start=...&end=...``.

    The base URL comes from ``base_url`` or the HORIZONBENCH_DATA_URL
    environment variable.  Transient failures (connection errors, 5xx) are
    retried with exponential backoff for ``retries`` total attempts; client
    errors fail immediately.

    Raises:
        FetchError: endpoint unreachable after retries, or non-success status.
        MarketDataError: response body is not the expected CSV schema.
    """
    base = base_url or os.environ.get(DATA_URL_ENV)
    if not base:
        raise FetchError(
            f"no endpoint configured: pass base_url or set {DATA_URL_ENV}"
        )
    url = f"{base.rstrip('/')}/{symbol}"
    params = {"start": start, "end": end}

    last_error: Exception | None = None
    for attempt in range(retries):
        if attempt:
            time.sleep(backoff * 2 ** (attempt - 1))
        try:
            response = requests.get(url, params=params, timeout=timeout)
        except requests.RequestException as exc:
            last_error = exc
            continue
        if response.status_code >= 500:
            last_error = FetchError(
                f"server error {response.status_code} from {url}"
            )
            continue
        if response.status_code != 200:
            raise FetchError(f"status {response.status_code} from {url}")
        return parse_ohlcv_csv(response.text, symbol=symbol)
    raise FetchError(f"giving up on {url} after {retries} attempts: {last_error}")


def summarize(table: TimeSeriesTable) -> SummaryStats:
    """Count/mean/std/min/quartiles/max for every numeric column.

    Std is the sample standard deviation (n-1 denominator); quartiles use
    linear interpolation between order statistics.

    Raises:
        MarketDataError: empty table.
    """
    if len(table) == 0:
        raise MarketDataError("cannot summarize an empty table")
    degenerate = len(table) == 1
    columns: dict[str, ColumnStats] = {}
    for name in NUMERIC_COLUMNS:
        values = table.column(name)
        q25, q50, q75 = np.percentile(values, [25, 50, 75])
        std = 0.0 if degenerate else float(np.std(values, ddof=1))
        columns[name] = ColumnStats(
            count=len(values),
            mean=float(np.mean(values)),
            std=std,
            min=float(np.min(values)),
            q25=float(q25),
            q50=float(q50),
            q75=float(q75),
            max=float(np.max(values)),
        )
    return SummaryStats(columns=columns, degenerate=degenerate)


def select_series(table: TimeSeriesTable, column: str) -> Series:
    """Extract one numeric column as a date-indexed Series.

    Raises:
        MarketDataError: unknown column name.
    """
    attr = normalize_column(column)
    return Series(name=attr, dates=table.dates(), values=table.column(column))
