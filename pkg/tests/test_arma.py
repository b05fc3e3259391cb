import json

import numpy as np
import pytest

from horizonbench.arma import (
    ArimaModel,
    ArmaError,
    ArmaParams,
    ResidualTrace,
    StationarityWarning,
    css_residuals,
    fit_arima,
    fit_arma,
    forecast,
    model_from_json,
    model_to_json,
    nelder_mead,
    rolling_one_step,
    select_order,
    select_pq,
)


def simulate_ar1(phi: float, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(n)
    y = np.empty(n)
    y[0] = eps[0]
    for t in range(1, n):
        y[t] = phi * y[t - 1] + eps[t]
    return y


def bare_model(ar=(), ma=(), c=0.0, d=0, seeds=()) -> ArimaModel:
    return ArimaModel(
        params=ArmaParams(ar=ar, ma=ma, intercept=c),
        d=d,
        seeds=seeds,
        fitted_on=0,
        aic=0.0,
        resid=ResidualTrace(residuals=np.zeros(1), css=0.0),
    )


class TestCssResiduals:
    def test_null_model(self):
        trace = css_residuals(ArmaParams((), (), 0.0), [1.0, 2.0, 3.0])
        assert trace.residuals.tolist() == [1.0, 2.0, 3.0]
        assert trace.css == 14.0

    def test_perfect_persistence(self):
        trace = css_residuals(ArmaParams((1.0,), (), 0.0), [1.0, 1.0, 1.0, 1.0])
        assert trace.residuals.tolist() == [0.0, 0.0, 0.0]

    def test_hand_recursion(self):
        trace = css_residuals(ArmaParams((0.5,), (), 0.0), [2.0, 4.0, 5.0])
        assert trace.residuals.tolist() == [3.0, 3.0]

    def test_ma_recursion_uses_plus_convention(self):
        # y_t = c + theta * eps_{t-1} + eps_t  =>  eps_t = y_t - theta*eps_{t-1}
        trace = css_residuals(ArmaParams((), (0.5,), 0.0), [0.0, 2.0, 2.0])
        assert trace.residuals.tolist() == [2.0, 1.0]

    def test_too_short(self):
        with pytest.raises(ArmaError, match="too short"):
            css_residuals(ArmaParams((0.5, 0.1), (), 0.0), [1.0, 2.0])

    def test_reconstruction_is_exact(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            p, q = int(rng.integers(0, 3)), int(rng.integers(0, 3))
            params = ArmaParams(
                ar=tuple(rng.uniform(-0.5, 0.5, p)),
                ma=tuple(rng.uniform(-0.5, 0.5, q)),
                intercept=float(rng.uniform(-1, 1)),
            )
            y = rng.standard_normal(60)
            eps = css_residuals(params, y).residuals
            m = max(p, q)
            eps_full = np.concatenate([np.zeros(m), eps])
            rebuilt = np.empty_like(y)
            rebuilt[:m] = y[:m]
            for t in range(m, len(y)):
                value = params.intercept + eps_full[t]
                for i in range(1, p + 1):
                    value += params.ar[i - 1] * y[t - i]
                for j in range(1, q + 1):
                    value += params.ma[j - 1] * eps_full[t - j]
                rebuilt[t] = value
            assert np.max(np.abs(rebuilt - y)) < 1e-10


class TestNelderMead:
    def test_quadratic_bowl(self):
        result = nelder_mead(lambda x: float((x[0] - 3) ** 2 + (x[1] + 1) ** 2), [0.0, 0.0])
        assert result.converged
        assert result.x == pytest.approx([3.0, -1.0], abs=1e-6)

    def test_best_history_monotone_on_css_objective(self):
        y = simulate_ar1(0.6, 300, seed=15)
        history_probe = []

        def objective(theta):
            value = css_residuals(
                ArmaParams((float(np.clip(theta[0], -0.99, 0.99)),), (), float(theta[1])), y
            ).css
            history_probe.append(value)
            return value

        result = nelder_mead(objective, [0.0, 0.0])
        best = result.best_history
        assert all(b2 <= b1 + 1e-12 for b1, b2 in zip(best, best[1:]))


class TestFitArma:
    def test_p0_q0_analytic_optimum(self):
        rng = np.random.default_rng(16)
        y = rng.uniform(2.0, 5.0, 80)
        model = fit_arma(y, 0, 0)
        assert abs(model.params.intercept - np.mean(y)) < 1e-6
        assert model.resid.css == pytest.approx(len(y) * np.var(y), rel=1e-6)

    def test_recovers_ar1_phi(self):
        y = simulate_ar1(0.7, 2000, seed=7)
        model = fit_arma(y, 1, 0)
        assert 0.65 <= model.params.ar[0] <= 0.75
        assert model.converged

    def test_white_noise_phi_near_zero(self):
        y = np.random.default_rng(11).standard_normal(2000)
        model = fit_arma(y, 1, 0)
        assert abs(model.params.ar[0]) < 0.08

    def test_aic_formula(self):
        y = simulate_ar1(0.5, 200, seed=17)
        model = fit_arma(y, 1, 0)
        n_eff = len(model.resid.residuals)
        expected = n_eff * np.log(model.resid.css / n_eff) + 2 * 2
        assert model.aic == pytest.approx(expected)

    def test_params_stay_in_box(self):
        walk = np.cumsum(np.random.default_rng(18).standard_normal(400)) + 100
        model = fit_arma(walk, 1, 0)
        assert abs(model.params.ar[0]) <= 0.99

    def test_too_short(self):
        with pytest.raises(ArmaError, match="too short"):
            fit_arma(np.arange(15.0), 1, 1)

    def test_constant_series(self):
        with pytest.raises(ArmaError, match="constant"):
            fit_arma(np.full(50, 2.0), 1, 0)


class TestFitArima:
    def test_d0_identical_to_fit_arma(self):
        y = simulate_ar1(0.4, 300, seed=19)
        a = fit_arma(y, 1, 1)
        b = fit_arima(y, 1, 0, 1)
        assert a.params == b.params
        assert a.aic == b.aic

    def test_ramp_with_tiny_noise(self):
        ramp = np.arange(1.0, 101.0) + np.random.default_rng(4).normal(0, 0.01, 100)
        model = fit_arima(ramp, 0, 1, 0)
        assert model.params.intercept == pytest.approx(1.0, abs=0.01)
        assert model.d == 1 and len(model.seeds) == 1

    def test_random_walk_recovers_noise(self):
        noise = np.random.default_rng(9).standard_normal(300)
        walk = np.cumsum(noise)
        model = fit_arima(walk, 0, 1, 0)
        recovered = model.resid.residuals + model.params.intercept
        assert np.max(np.abs(recovered - noise[1:])) < 1e-6


class TestSelectOrder:
    def test_white_noise_picks_000(self):
        y = np.random.default_rng(5).standard_normal(500)
        selection = select_order(y, 2, 2, (0, 1))
        assert tuple(selection) == (0, 0, 0)
        assert selection.d_stationary

    def test_stationary_ar1_keeps_d0(self):
        y = simulate_ar1(0.6, 800, seed=6)
        selection = select_order(y, 2, 2, (0, 1))
        assert selection.d == 0

    def test_random_walk_needs_d1(self):
        walk = np.cumsum(np.random.default_rng(8).standard_normal(600))
        selection = select_order(walk, 1, 1, (0, 1))
        assert selection.d == 1
        assert selection.d_stationary

    def test_fallback_warns_when_nothing_stationary(self):
        walk = np.cumsum(np.random.default_rng(8).standard_normal(600)) + 500
        with pytest.warns(StationarityWarning):
            selection = select_order(walk, 1, 0, (0,))
        assert selection.d == 0
        assert not selection.d_stationary

    def test_select_pq_tie_breaking_order(self):
        y = np.random.default_rng(5).standard_normal(500)
        p, q, aic = select_pq(y, 2, 2)
        assert (p, q) == (0, 0)
        assert np.isfinite(aic)


class TestForecast:
    def test_constant_model(self):
        model = bare_model(c=5.0)
        assert forecast(model, [5.0] * 10, 3).tolist() == [5.0, 5.0, 5.0]

    def test_ar1_hand_recursion(self):
        model = bare_model(ar=(0.5,))
        assert forecast(model, [1.0, 2.0, 8.0], 3).tolist() == [4.0, 2.0, 1.0]

    def test_ma1_one_step_memory(self):
        # history [0, 0, 2] with theta=0.5 leaves a final fitted eps of 2
        model = bare_model(ma=(0.5,))
        assert forecast(model, [0.0, 0.0, 2.0], 2).tolist() == [1.0, 0.0]

    def test_flat_continuation_when_all_zero(self):
        # phi = theta = 0, c = 0 on the differenced scale: the d-th
        # differences of the forecast are all zero
        history = np.cumsum(np.cumsum(np.ones(30))) + 7.0
        model = bare_model(d=2, seeds=(7.0, 1.0))
        result = forecast(model, history, 5)
        joined = np.concatenate([history[-1:], result])
        assert np.max(np.abs(np.diff(joined, n=2))) < 1e-9

    def test_history_too_short(self):
        model = bare_model(ar=(0.5, 0.1), ma=(), d=1)
        with pytest.raises(ArmaError, match="too short"):
            forecast(model, [1.0, 2.0], 1)

    def test_bad_steps(self):
        with pytest.raises(ArmaError):
            forecast(bare_model(c=1.0), [1.0, 2.0], 0)


class TestRollingOneStep:
    def test_constant_model(self):
        model = bare_model(c=5.0)
        preds = rolling_one_step(model, [5.0] * 20, [4.0, 6.0, 5.0])
        assert preds.tolist() == [5.0, 5.0, 5.0]

    def test_phi_one_is_naive_persistence(self):
        model = bare_model(ar=(1.0,))
        train = [1.0, 2.0, 3.0]
        test = [4.0, 7.0, 2.0]
        preds = rolling_one_step(model, train, test)
        assert preds.tolist() == [3.0, 4.0, 7.0]

    def test_one_step_mse_near_noise_floor(self):
        y = simulate_ar1(0.7, 1400, seed=33)
        train, test = y[:1000], y[1000:]
        model = fit_arma(train, 1, 0)
        preds = rolling_one_step(model, train, test)
        mse = float(np.mean((preds - test) ** 2))
        assert abs(mse - 1.0) <= 0.15  # sigma^2 = 1


class TestSerialization:
    def test_json_schema_keys(self):
        y = simulate_ar1(0.5, 200, seed=20)
        model = fit_arima(y, 1, 1, 0)
        payload = json.loads(model_to_json(model))
        assert set(payload) == {"p", "d", "q", "ar", "ma", "intercept", "aic", "seeds"}
        assert payload["p"] == 1 and payload["d"] == 1 and payload["q"] == 0
        assert len(payload["seeds"]) == 1

    def test_roundtrip(self):
        y = simulate_ar1(0.5, 200, seed=20)
        model = fit_arima(y, 1, 1, 0)
        again = model_from_json(model_to_json(model))
        assert again.params == model.params
        assert again.order == model.order
        assert again.seeds == model.seeds
