"""Augmented Dickey-Fuller unit-root test and moving-average decomposition."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .market_data import Series
from .preprocess import _as_values

# Large-sample critical values for the constant-only regression.
ADF_CRIT_1PCT = -3.43
ADF_CRIT_5PCT = -2.86
ADF_CRIT_10PCT = -2.57

_P_ANCHORS = ((ADF_CRIT_1PCT, 0.01), (ADF_CRIT_5PCT, 0.05), (ADF_CRIT_10PCT, 0.10))
_P_CLAMP = (0.001, 0.999)


class StationarityError(ValueError):
    """Invalid input to a stationarity computation."""


@dataclass(eq=False)
class OlsFit:
    """Least-squares fit with coefficient standard errors.

    Attributes
    ----------
    coefficients : ndarray, shape (k,)
    std_errors : ndarray, shape (k,)
    residuals : ndarray, shape (n,)
    dof : int
        Residual degrees of freedom, n - k.
    """

    coefficients: np.ndarray
    std_errors: np.ndarray
    residuals: np.ndarray
    dof: int


def ols_fit(X: np.ndarray, y: np.ndarray) -> OlsFit:
    """Ordinary least squares via QR decomposition.

    Parameters
    ----------
    X : ndarray, shape (n, k)
        Full-column-rank regressor matrix with n > k.
    y : ndarray, shape (n,)

    Raises
    ------
    StationarityError
        On dimension mismatch or (near-)rank deficiency.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise StationarityError(f"X must be 2-D, got {X.ndim}-D")
    n, k = X.shape
    if y.shape != (n,):
        raise StationarityError(f"y has shape {y.shape}, expected ({n},)")
    if n <= k:
        raise StationarityError(f"need more rows ({n}) than columns ({k})")

    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise StationarityError("regressor matrix is rank deficient")
    beta = np.linalg.solve(r, q.T @ y)
    residuals = y - X @ beta
    dof = n - k
    sigma2 = float(residuals @ residuals) / dof
    r_inv = np.linalg.inv(r)
    xtx_inv_diag = np.sum(r_inv * r_inv, axis=1)
    std_errors = np.sqrt(sigma2 * xtx_inv_diag)
    return OlsFit(coefficients=beta, std_errors=std_errors, residuals=residuals, dof=dof)


@dataclass(frozen=True)
class AdfResult:
    """Outcome of the constant-only ADF regression.

    The p-value is a coarse monotone interpolation across the three
    critical-value anchors, clamped to [0.001, 0.999]; it is adequate for
    reject / fail-to-reject decisions, not for fine inference.
    """

    statistic: float
    p_value: float
    crit_1pct: float
    crit_5pct: float
    crit_10pct: float
    lags_used: int
    reject_at_5pct: bool


def _interp_p_value(stat: float) -> float:
    (s1, p1), (s2, p2), (s3, p3) = _P_ANCHORS
    if stat <= s2:
        slope = (p2 - p1) / (s2 - s1)
        p = p1 + slope * (stat - s1)
    else:
        slope = (p3 - p2) / (s3 - s2)
        p = p2 + slope * (stat - s2)
    return float(min(max(p, _P_CLAMP[0]), _P_CLAMP[1]))


def default_adf_lag(n: int) -> int:
    """Schwert rule floor(12 * (n/100)^(1/4)), clamped to the usable sample."""
    lag = math.floor(12.0 * (n / 100.0) ** 0.25)
    return max(0, min(lag, (n - 1) // 2 - 2))


def adf_test(series, max_lag: int | None = None) -> AdfResult:
    """Augmented Dickey-Fuller test with constant, no deterministic trend.

    Regression: dy_t = alpha + gamma * y_{t-1} + sum_i delta_i * dy_{t-i}.
    The statistic is the t-ratio of gamma, compared against the large-sample
    constant-only critical values.

    Parameters
    ----------
    series : Series or array-like
        At least 20 observations, non-constant.
    max_lag : int, optional
        Lag order L; defaults to the Schwert rule.

    Raises
    ------
    StationarityError
        Series too short or constant.
    """
    y = _as_values(series)
    n = len(y)
    if n < 20:
        raise StationarityError(f"ADF test needs at least 20 observations, got {n}")
    if np.max(y) == np.min(y):
        raise StationarityError("ADF test is undefined for a constant series")

    lag = default_adf_lag(n) if max_lag is None else int(max_lag)
    if lag < 0:
        raise StationarityError(f"max_lag must be >= 0, got {max_lag}")
    max_usable = (n - 1) // 2 - 2
    lag = min(lag, max(max_usable, 0))

    dy = np.diff(y)
    fit = None
    while True:
        rows = n - 1 - lag
        response = dy[lag:]
        regressors = np.empty((rows, 2 + lag), dtype=float)
        regressors[:, 0] = 1.0
        regressors[:, 1] = y[lag : n - 1]
        for i in range(1, lag + 1):
            regressors[:, 1 + i] = dy[lag - i : n - 1 - i]
        try:
            fit = ols_fit(regressors, response)
            break
        except StationarityError:
            # Perfectly periodic or otherwise collinear lag structure; drop
            # lags until the regression is identified.
            if lag == 0:
                raise
            lag -= 1
    stat = float(fit.coefficients[1] / fit.std_errors[1])
    return AdfResult(
        statistic=stat,
        p_value=_interp_p_value(stat),
        crit_1pct=ADF_CRIT_1PCT,
        crit_5pct=ADF_CRIT_5PCT,
        crit_10pct=ADF_CRIT_10PCT,
        lags_used=lag,
        reject_at_5pct=stat < ADF_CRIT_5PCT,
    )


@dataclass(eq=False)
class Decomposition:
    """Additive split of a series into a smooth trend and residuals.

    ``trend`` and ``residual`` are NaN at the (window-1)/2 undefined edge
    indices; wherever trend is defined, original = trend + residual.
    """

    original: Series
    trend: np.ndarray
    residual: np.ndarray
    window: int

    def defined_slice(self) -> slice:
        half = (self.window - 1) // 2
        return slice(half, len(self.trend) - half)


def decompose(series, window: int) -> Decomposition:
    """Centered moving-average trend and the residuals around it.

    Parameters
    ----------
    series : Series or array-like
    window : int
        Odd averaging width with 3 <= window <= len(series).
    """
    values = _as_values(series)
    n = len(values)
    if window % 2 == 0 or window < 3 or window > n:
        raise StationarityError(
            f"window must be odd and within [3, {n}], got {window}"
        )
    half = (window - 1) // 2
    trend = np.full(n, np.nan)
    trend[half : n - half] = np.convolve(values, np.full(window, 1.0 / window), "valid")
    residual = values - trend
    original = (
        series
        if isinstance(series, Series)
        else Series(name="series", dates=(), values=values)
    )
    return Decomposition(original=original, trend=trend, residual=residual, window=window)


def decomposition_to_csv(decomp: Decomposition) -> str:
    """Three-column CSV (index, trend, residual); blank cells at the edges."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["index", "trend", "residual"])
    for i in range(len(decomp.trend)):
        t, r = decomp.trend[i], decomp.residual[i]
        if np.isnan(t):
            writer.writerow([i, "", ""])
        else:
            writer.writerow([i, repr(float(t)), repr(float(r))])
    return out.getvalue()
