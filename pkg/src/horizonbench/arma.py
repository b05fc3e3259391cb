"""ARMA/ARIMA estimation by conditional sum of squares, plus forecasting.

The moving-average part uses the plus sign convention throughout:
y_t = c + sum_i phi_i * y_{t-i} + sum_j theta_j * eps_{t-j} + eps_t.
Pre-sample errors are fixed at zero (conditional method).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .preprocess import DifferencedSeries, _as_values, difference
from .stationarity import adf_test

PARAM_BOX = 0.99
_PENALTY_WEIGHT = 1e6


class ArmaError(ValueError):
    """Invalid ARMA estimation or forecasting request."""


class StationarityWarning(UserWarning):
    """No differencing order in the grid achieved stationarity."""


@dataclass(frozen=True)
class ArmaParams:
    """AR coefficients, MA coefficients, and intercept."""

    ar: tuple[float, ...]
    ma: tuple[float, ...]
    intercept: float

    @property
    def p(self) -> int:
        return len(self.ar)

    @property
    def q(self) -> int:
        return len(self.ma)


@dataclass(eq=False)
class ResidualTrace:
    """One-step innovations and their conditional sum of squares."""

    residuals: np.ndarray
    css: float


@dataclass(eq=False)
class ArimaModel:
    """A fitted ARIMA(p, d, q) model on the differenced scale."""

    params: ArmaParams
    d: int
    seeds: tuple[float, ...]
    fitted_on: int
    aic: float
    resid: ResidualTrace
    converged: bool = True

    @property
    def order(self) -> tuple[int, int, int]:
        return (self.params.p, self.d, self.params.q)


def _residuals_core(
    y: np.ndarray, phi: np.ndarray, theta: np.ndarray, c: float, ar_lags: np.ndarray
) -> np.ndarray:
    """CSS recursion for t >= max(p, q); ``ar_lags`` is the precomputed lag matrix."""
    p, q = len(phi), len(theta)
    m = max(p, q)
    rhs = y[m:] - c
    if p:
        rhs = rhs - ar_lags @ phi
    if q == 0:
        return rhs
    out = [0.0] * len(rhs)
    rhs_list = rhs.tolist()
    th = theta.tolist()
    for j in range(len(rhs_list)):
        acc = rhs_list[j]
        for k in range(q):
            jk = j - 1 - k
            if jk >= 0:
                acc -= th[k] * out[jk]
        out[j] = acc
    return np.asarray(out)


def _ar_lag_matrix(y: np.ndarray, p: int, m: int) -> np.ndarray:
    """Column i-1 holds y_{t-i} for t = m .. n-1."""
    n = len(y)
    lags = np.empty((n - m, p), dtype=float)
    for i in range(1, p + 1):
        lags[:, i - 1] = y[m - i : n - i]
    return lags


def css_residuals(params: ArmaParams, series) -> ResidualTrace:
    """Conditional-sum-of-squares residuals of ``params`` on a series.

    Residuals are reported for t > max(p, q) only, with pre-sample errors
    set to zero.
    """
    y = _as_values(series)
    p, q = params.p, params.q
    m = max(p, q)
    if len(y) <= m:
        raise ArmaError(f"series of length {len(y)} too short for orders ({p}, {q})")
    phi = np.asarray(params.ar, dtype=float)
    theta = np.asarray(params.ma, dtype=float)
    lags = _ar_lag_matrix(y, p, m) if p else np.empty((len(y) - m, 0))
    eps = _residuals_core(y, phi, theta, params.intercept, lags)
    return ResidualTrace(residuals=eps, css=float(eps @ eps))


@dataclass(eq=False)
class SimplexResult:
    """Outcome of a Nelder-Mead minimization."""

    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    best_history: list[float] = field(default_factory=list)


def nelder_mead(
    objective,
    x0,
    step: float = 0.1,
    spread_tol: float = 1e-8,
    max_iter: int = 2000,
) -> SimplexResult:
    """Derivative-free simplex minimization (reflection 1, expansion 2,
    contraction 0.5, shrink 0.5).

    Deterministic: the initial simplex is x0 plus ``step`` along each axis,
    and convergence is declared when the max-norm spread of the simplex
    around its best vertex falls below ``spread_tol``.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = len(x0)
    vertices = [x0.copy()]
    for i in range(dim):
        v = x0.copy()
        v[i] += step
        vertices.append(v)
    values = [float(objective(v)) for v in vertices]

    history: list[float] = []
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        order = np.argsort(values, kind="stable")
        vertices = [vertices[i] for i in order]
        values = [values[i] for i in order]
        history.append(values[0])

        spread = max(np.max(np.abs(v - vertices[0])) for v in vertices[1:])
        if spread < spread_tol:
            converged = True
            break

        centroid = np.mean(vertices[:-1], axis=0)
        worst = vertices[-1]
        reflected = centroid + (centroid - worst)
        f_reflected = float(objective(reflected))
        if values[0] <= f_reflected < values[-2]:
            vertices[-1], values[-1] = reflected, f_reflected
            continue
        if f_reflected < values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            f_expanded = float(objective(expanded))
            if f_expanded < f_reflected:
                vertices[-1], values[-1] = expanded, f_expanded
            else:
                vertices[-1], values[-1] = reflected, f_reflected
            continue
        contracted = centroid + 0.5 * (worst - centroid)
        f_contracted = float(objective(contracted))
        if f_contracted < values[-1]:
            vertices[-1], values[-1] = contracted, f_contracted
            continue
        best = vertices[0]
        vertices = [best] + [best + 0.5 * (v - best) for v in vertices[1:]]
        values = [values[0]] + [float(objective(v)) for v in vertices[1:]]

    order = np.argsort(values, kind="stable")
    best_idx = int(order[0])
    return SimplexResult(
        x=vertices[best_idx],
        fun=values[best_idx],
        iterations=iteration,
        converged=converged,
        best_history=history,
    )


def _css_objective(y: np.ndarray, p: int, q: int):
    m = max(p, q)
    lags = _ar_lag_matrix(y, p, m) if p else np.empty((len(y) - m, 0))

    def objective(theta_vec: np.ndarray) -> float:
        phi = theta_vec[:p]
        theta = theta_vec[p : p + q]
        c = theta_vec[p + q]
        phi_c = np.clip(phi, -PARAM_BOX, PARAM_BOX)
        theta_c = np.clip(theta, -PARAM_BOX, PARAM_BOX)
        penalty = _PENALTY_WEIGHT * (
            float(np.sum((phi - phi_c) ** 2)) + float(np.sum((theta - theta_c) ** 2))
        )
        eps = _residuals_core(y, phi_c, theta_c, c, lags)
        return float(eps @ eps) + penalty

    return objective


def _fit_core(
    values: np.ndarray, p: int, q: int, d: int, seeds: tuple[float, ...], fitted_on: int
) -> ArimaModel:
    n = len(values)
    if p < 0 or q < 0:
        raise ArmaError(f"orders must be non-negative, got ({p}, {q})")
    if n < 10 * (p + q + 1):
        raise ArmaError(
            f"series of length {n} too short to fit ARMA({p},{q}); "
            f"need at least {10 * (p + q + 1)}"
        )
    if np.max(values) == np.min(values):
        raise ArmaError("cannot fit ARMA on a constant series")

    x0 = np.zeros(p + q + 1)
    x0[p + q] = float(np.mean(values))
    result = nelder_mead(_css_objective(values, p, q), x0)
    if not result.converged:
        warnings.warn(
            f"ARMA({p},{q}) fit stopped at iteration cap; best objective "
            f"{result.fun:.6g} retained",
            UserWarning,
            stacklevel=3,
        )
    ar = tuple(float(v) for v in np.clip(result.x[:p], -PARAM_BOX, PARAM_BOX))
    ma = tuple(float(v) for v in np.clip(result.x[p : p + q], -PARAM_BOX, PARAM_BOX))
    params = ArmaParams(ar=ar, ma=ma, intercept=float(result.x[p + q]))
    trace = css_residuals(params, values)
    n_eff = len(trace.residuals)
    aic = n_eff * float(np.log(trace.css / n_eff)) + 2.0 * (p + q + 1)
    return ArimaModel(
        params=params,
        d=d,
        seeds=seeds,
        fitted_on=fitted_on,
        aic=aic,
        resid=trace,
        converged=result.converged,
    )


def fit_arma(series, p: int, q: int) -> ArimaModel:
    """Fit ARMA(p, q) by minimizing the conditional sum of squares.

    Deterministic simplex search started at phi = theta = 0 with the
    intercept at the series mean; AR/MA coefficients are kept inside the
    +-0.99 box by clamping plus a quadratic penalty.
    """
    values = _as_values(series)
    return _fit_core(values, p, q, d=0, seeds=(), fitted_on=len(values))


def fit_arima(series, p: int, d: int, q: int) -> ArimaModel:
    """Difference ``d`` times, then fit ARMA(p, q) on the differenced scale."""
    values = _as_values(series)
    diffed = difference(values, d)
    return _fit_core(
        diffed.values, p, q, d=d, seeds=diffed.seeds, fitted_on=len(values)
    )


@dataclass(frozen=True)
class OrderSelection:
    """Chosen (p, d, q) with the differencing-stationarity outcome."""

    p: int
    d: int
    q: int
    d_stationary: bool
    aic: float

    def __iter__(self):
        return iter((self.p, self.d, self.q))


def select_pq(series, p_max: int = 3, q_max: int = 3) -> tuple[int, int, float]:
    """Exhaustive (p, q) AIC search at the series' current differencing level.

    Returns (p, q, aic); AIC ties break toward smaller p+q, then smaller p.
    Grid cells the series is too short for are skipped.
    """
    values = _as_values(series)
    if p_max < 0 or q_max < 0:
        raise ArmaError("empty order grid")
    candidates = []
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            if len(values) < 10 * (p + q + 1):
                continue
            model = _fit_core(values, p, q, 0, (), len(values))
            candidates.append((model.aic, p + q, p, q))
    if not candidates:
        raise ArmaError("series too short for every order in the grid")
    aic, _, p, q = min(candidates)
    return p, q, aic


def select_order(
    series,
    p_max: int = 3,
    q_max: int = 3,
    d_choices: tuple[int, ...] = (0, 1),
) -> OrderSelection:
    """Pick d by the ADF gate, then (p, q) by exhaustive AIC search.

    d is the smallest order in ``d_choices`` whose differenced series rejects
    the ADF test at 5%; if none does, the largest order is used and a
    StationarityWarning is emitted.
    """
    values = _as_values(series)
    if not d_choices:
        raise ArmaError("empty order grid")

    chosen_d = None
    for d in sorted(set(int(d) for d in d_choices)):
        if adf_test(difference(values, d).values).reject_at_5pct:
            chosen_d = d
            break
    stationary = chosen_d is not None
    if not stationary:
        chosen_d = max(d_choices)
        warnings.warn(
            f"no differencing order in {sorted(set(d_choices))} achieved "
            f"stationarity at 5%; falling back to d={chosen_d}",
            StationarityWarning,
            stacklevel=2,
        )

    diffed = difference(values, chosen_d).values
    p, q, aic = select_pq(diffed, p_max, q_max)
    return OrderSelection(p=p, d=chosen_d, q=q, d_stationary=stationary, aic=aic)


def forecast(model: ArimaModel, history, steps: int) -> np.ndarray:
    """Recursive h-step forecast in the units of ``history``.

    Future innovations are zero; lagged innovations come from the residual
    recursion over the supplied history.  Forecasts on the differenced scale
    are integrated back through d levels using the history tail.
    """
    y = _as_values(history)
    p, d, q = model.order
    if steps < 1:
        raise ArmaError(f"steps must be >= 1, got {steps}")
    if len(y) <= max(p, q, d) or len(y) - d < max(p, q):
        raise ArmaError(
            f"history of length {len(y)} too short for order ({p},{d},{q})"
        )

    levels = [y]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    work = levels[-1]

    m = max(p, q)
    eps = np.zeros(len(work))
    if m < len(work):
        eps[m:] = css_residuals(model.params, work).residuals

    phi = list(model.params.ar)
    theta = list(model.params.ma)
    c = model.params.intercept
    w = work.tolist()
    e = eps.tolist()
    for _ in range(steps):
        t = len(w)
        value = c
        for i in range(1, p + 1):
            value += phi[i - 1] * w[t - i]
        for j in range(1, q + 1):
            value += theta[j - 1] * e[t - j]
        w.append(value)
        e.append(0.0)

    result = np.asarray(w[len(work) :])
    for level in range(d - 1, -1, -1):
        result = levels[level][-1] + np.cumsum(result)
    return result


def rolling_one_step(model: ArimaModel, train, test) -> np.ndarray:
    """Walk-forward one-step predictions over the test span.

    Parameters stay frozen; each prediction conditions on every true
    observation before it (the innovation recursion is re-run on the
    extended history, so realized errors feed the MA terms).
    """
    history = list(_as_values(train))
    test_values = _as_values(test)
    predictions = np.empty(len(test_values))
    for i, actual in enumerate(test_values):
        predictions[i] = forecast(model, np.asarray(history), 1)[0]
        history.append(float(actual))
    return predictions


def model_to_json(model: ArimaModel) -> str:
    """Serialize a fitted model as the documented flat JSON object."""
    p, d, q = model.order
    payload = {
        "p": p,
        "d": d,
        "q": q,
        "ar": list(model.params.ar),
        "ma": list(model.params.ma),
        "intercept": model.params.intercept,
        "aic": model.aic,
        "seeds": list(model.seeds),
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def model_from_json(text: str) -> ArimaModel:
    """Rebuild a model from :func:`model_to_json` output (no residual trace)."""
    raw = json.loads(text)
    params = ArmaParams(
        ar=tuple(raw["ar"]), ma=tuple(raw["ma"]), intercept=float(raw["intercept"])
    )
    return ArimaModel(
        params=params,
        d=int(raw["d"]),
        seeds=tuple(raw["seeds"]),
        fitted_on=0,
        aic=float(raw["aic"]),
        resid=ResidualTrace(residuals=np.empty(0), css=0.0),
    )
