"""Point-forecast evaluation metrics: MSE, RMSE, MAE, MAPE, R-squared."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    """Undefined metric (length mismatch, empty input, zero actuals, ...)."""


def _pair(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1:
        raise MetricError(f"shape mismatch: {p.shape} vs {a.shape}")
    if len(p) == 0:
        raise MetricError("empty input")
    return p, a


def mse(pred, actual) -> float:
    """Mean squared difference."""
    p, a = _pair(pred, actual)
    return float(np.mean((p - a) ** 2))


def rmse(pred, actual) -> float:
    """Square root of the mean squared difference."""
    return float(np.sqrt(mse(pred, actual)))


def mae(pred, actual) -> float:
    """Mean absolute difference."""
    p, a = _pair(pred, actual)
    return float(np.mean(np.abs(p - a)))


def mape(pred, actual) -> float:
    """Mean absolute percentage difference, in percent.

    Raises:
        MetricError: any actual value is zero (the metric is undefined;
            rows are never silently skipped).
    """
    p, a = _pair(pred, actual)
    if np.any(a == 0.0):
        raise MetricError("MAPE is undefined when an actual value is zero")
    return float(np.mean(np.abs((p - a) / a)) * 100.0)


def r2(pred, actual) -> float:
    """1 - SS_res / SS_tot; can be arbitrarily negative for bad predictions."""
    p, a = _pair(pred, actual)
    if len(a) < 2:
        raise MetricError("R-squared needs at least 2 observations")
    ss_tot = float(np.sum((a - np.mean(a)) ** 2))
    if ss_tot == 0.0:
        raise MetricError("R-squared is undefined for constant actuals")
    ss_res = float(np.sum((a - p) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class MetricReport:
    """All five metrics over one prediction/actual pair.

    ``mape_percent`` is None when any actual value is zero.
    """

    mse: float
    rmse: float
    mae: float
    mape_percent: float | None
    r2: float
    n: int


def evaluate(pred, actual) -> MetricReport:
    """Compute every metric on the same pair; MAPE becomes None (flagged,
    not skipped row-wise) when a zero actual makes it undefined."""
    p, a = _pair(pred, actual)
    try:
        mape_value = mape(p, a)
    except MetricError:
        mape_value = None
    return MetricReport(
        mse=mse(p, a),
        rmse=rmse(p, a),
        mae=mae(p, a),
        mape_percent=mape_value,
        r2=r2(p, a),
        n=len(p),
    )
