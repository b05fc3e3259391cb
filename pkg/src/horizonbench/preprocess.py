"""Differencing, min-max scaling, supervised windowing, horizon splits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .market_data import Series, TimeSeriesTable, select_series


class PreprocessError(ValueError):
    """Invalid preprocessing request (short series, bad window, ...)."""


def _as_values(series) -> np.ndarray:
    values = series.values if isinstance(series, (Series, ScaledSeries)) else series
    return np.asarray(values, dtype=float)


@dataclass(eq=False)
class DifferencedSeries:
    """Result of d-fold first differencing, with the seeds needed to invert it.

    ``seeds[i]`` is the first element of the series entering pass i+1, so
    integration can rebuild every intermediate level exactly.
    """

    values: np.ndarray
    order: int
    seeds: tuple[float, ...]


def difference(series, d: int) -> DifferencedSeries:
    """Apply first differencing d times; d = 0 returns a copy."""
    values = _as_values(series)
    if d < 0:
        raise PreprocessError(f"differencing order must be >= 0, got {d}")
    if len(values) <= d:
        raise PreprocessError(
            f"series of length {len(values)} too short for d={d} differencing"
        )
    seeds = []
    for _ in range(d):
        seeds.append(float(values[0]))
        values = np.diff(values)
    return DifferencedSeries(values=values.copy(), order=d, seeds=tuple(seeds))


def integrate(diff: DifferencedSeries) -> np.ndarray:
    """Exact inverse of :func:`difference`; returns the original values."""
    if len(diff.seeds) != diff.order:
        raise PreprocessError(
            f"order {diff.order} needs {diff.order} seed(s), got {len(diff.seeds)}"
        )
    values = np.asarray(diff.values, dtype=float)
    for seed in reversed(diff.seeds):
        values = seed + np.concatenate(([0.0], np.cumsum(values)))
    return values


@dataclass(frozen=True)
class MinMaxScaler:
    """Affine map sending the fitted [lo, hi] range onto [0, 1]."""

    lo: float
    hi: float

    def transform(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.lo) / (self.hi - self.lo)

    def inverse(self, values) -> np.ndarray:
        return self.lo + np.asarray(values, dtype=float) * (self.hi - self.lo)


@dataclass(eq=False)
class ScaledSeries:
    """A series in scaled units, carrying the scaler that produced it."""

    name: str
    dates: tuple
    values: np.ndarray
    scaler: MinMaxScaler

    def __len__(self) -> int:
        return len(self.values)


def fit_minmax(train) -> MinMaxScaler:
    """Fit scaler bounds on training data only (no test leakage).

    Raises:
        PreprocessError: constant series (hi would equal lo).
    """
    values = _as_values(train)
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi <= lo:
        raise PreprocessError("cannot fit min-max scaler on a constant series")
    return MinMaxScaler(lo=lo, hi=hi)


def scale_series(series: Series, scaler: MinMaxScaler) -> ScaledSeries:
    return ScaledSeries(
        name=series.name,
        dates=series.dates,
        values=scaler.transform(series.values),
        scaler=scaler,
    )


@dataclass(eq=False)
class WindowedDataset:
    """Overlapping input windows with one-step-ahead targets."""

    inputs: np.ndarray
    targets: np.ndarray
    window_length: int

    def __len__(self) -> int:
        return len(self.targets)


def make_windows(series, w: int) -> WindowedDataset:
    """Slice a series into (length-w window, next value) training pairs."""
    values = _as_values(series)
    if w < 1:
        raise PreprocessError(f"window length must be >= 1, got {w}")
    n = len(values)
    if n <= w:
        raise PreprocessError(
            f"series of length {n} too short for window length {w}"
        )
    num = n - w
    inputs = np.empty((num, w), dtype=float)
    for i in range(num):
        inputs[i] = values[i : i + w]
    return WindowedDataset(inputs=inputs, targets=values[w:].copy(), window_length=w)


class Horizon(Enum):
    """Evaluation spans in trading rows (~252 rows per year)."""

    SHORT = "short"
    MEDIUM = "medium"
    LONG = "long"

    @property
    def rows(self) -> int:
        return {"short": 252, "medium": 630, "long": 1260}[self.value]

    @classmethod
    def parse(cls, name: str) -> "Horizon":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise PreprocessError(
                f"unknown horizon {name!r}; expected short, medium or long"
            ) from None


@dataclass(eq=False)
class HorizonSplit:
    """Chronological train/test split of the most recent horizon slice."""

    horizon: Horizon
    train: Series
    test: Series


def horizon_split(
    table: TimeSeriesTable,
    horizon: Horizon | str,
    train_fraction: float = 0.8,
    column: str = "close",
) -> HorizonSplit:
    """Take the most recent horizon-sized slice and split it chronologically.

    The slice is clamped to the rows available.  Splitting happens at
    ``floor(train_fraction * slice_length)``.

    Raises:
        PreprocessError: slice too small for a test set of at least 2 points.
    """
    if isinstance(horizon, str):
        horizon = Horizon.parse(horizon)
    if not 0.0 < train_fraction < 1.0:
        raise PreprocessError(f"train fraction must be in (0, 1), got {train_fraction}")
    series = select_series(table, column)
    size = min(horizon.rows, len(series))
    cut = math.floor(train_fraction * size)
    # boundary: fewer than 2/(1 - fraction) rows leaves under 2 test points
    # (epsilon guards the float division at exact boundaries such as 0.8)
    if size + 1e-9 < 2.0 / (1.0 - train_fraction) or cut < 1 or size - cut < 2:
        raise PreprocessError(
            f"{size} rows cannot support train_fraction={train_fraction} "
            "with at least 2 test points"
        )
    dates = series.dates[-size:]
    values = series.values[-size:]
    train = Series(name=series.name, dates=dates[:cut], values=values[:cut].copy())
    test = Series(name=series.name, dates=dates[cut:], values=values[cut:].copy())
    return HorizonSplit(horizon=horizon, train=train, test=test)
