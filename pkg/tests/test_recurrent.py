import math

import numpy as np
import pytest

from horizonbench.preprocess import fit_minmax, make_windows
from horizonbench.recurrent import (
    AdamState,
    GruParams,
    LstmParams,
    LstmState,
    RecurrentError,
    TrainConfig,
    adam_step,
    bptt_gradients,
    create_network,
    forward,
    forward_batch,
    grad_check,
    gru_cell,
    lstm_cell,
    network_from_json,
    network_to_json,
    params_dict,
    train,
)

from .conftest import sine_values


def zeroed_network(kind: str, hidden: int = 3):
    net = create_network(kind, hidden, input_size=1, seed=0)
    for arr in params_dict(net).values():
        arr[...] = 0.0
    return net


def zero_lstm_state(hidden: int) -> LstmState:
    return LstmState(h=np.zeros(hidden), c=np.zeros(hidden), gates=())


class TestLstmCell:
    def test_all_zero_params(self):
        net = zeroed_network("lstm")
        state = lstm_cell(net.params, np.array([0.7]), zero_lstm_state(3))
        i, f, g, o = state.gates
        assert np.allclose(i, 0.5) and np.allclose(f, 0.5) and np.allclose(o, 0.5)
        assert np.all(g == 0.0)
        assert np.all(state.c == 0.0) and np.all(state.h == 0.0)

    def test_carried_cell_state(self):
        net = zeroed_network("lstm", hidden=1)
        prev = LstmState(h=np.zeros(1), c=np.array([2.0]), gates=())
        state = lstm_cell(net.params, np.array([0.3]), prev)
        assert state.c == pytest.approx([1.0])
        # h = 0.5 * tanh(1) with tanh(1) ~ 0.76159
        assert state.h == pytest.approx([0.3807970779778824], abs=1e-5)

    def test_matches_scalar_oracle(self):
        net = create_network("lstm", 1, 1, seed=3)
        p = net.params
        sig = lambda v: 1.0 / (1.0 + math.exp(-v))
        x, h_prev, c_prev = 0.4, -0.2, 0.6
        i = sig(p.w_xi[0, 0] * x + p.w_hi[0, 0] * h_prev + p.b_i[0])
        f = sig(p.w_xf[0, 0] * x + p.w_hf[0, 0] * h_prev + p.b_f[0])
        g = math.tanh(p.w_xg[0, 0] * x + p.w_hg[0, 0] * h_prev + p.b_g[0])
        o = sig(p.w_xo[0, 0] * x + p.w_ho[0, 0] * h_prev + p.b_o[0])
        c = f * c_prev + i * g
        h = o * math.tanh(c)
        state = lstm_cell(
            p, np.array([x]), LstmState(h=np.array([h_prev]), c=np.array([c_prev]), gates=())
        )
        assert abs(state.h[0] - h) < 1e-12
        assert abs(state.c[0] - c) < 1e-12

    def test_shape_mismatch(self):
        net = create_network("lstm", 3, 1, seed=0)
        with pytest.raises(RecurrentError, match="size"):
            lstm_cell(net.params, np.array([1.0, 2.0]), zero_lstm_state(3))

    def test_non_finite_input(self):
        net = create_network("lstm", 3, 1, seed=0)
        with pytest.raises(RecurrentError, match="non-finite"):
            lstm_cell(net.params, np.array([np.nan]), zero_lstm_state(3))

    def test_gate_ranges(self):
        rng = np.random.default_rng(4)
        net = create_network("lstm", 6, 1, seed=4)
        for arr in params_dict(net).values():
            arr *= 5.0  # exaggerate weights; ranges must still hold
        state = zero_lstm_state(6)
        for _ in range(20):
            state = lstm_cell(net.params, rng.uniform(-3, 3, 1), state)
            i, f, g, o = state.gates
            for gate in (i, f, o):
                assert np.all((gate > 0.0) & (gate < 1.0))
            assert np.all((g > -1.0) & (g < 1.0))
            assert np.all(np.abs(state.h) < 1.0)


class TestGruCell:
    def test_halving_identity(self):
        net = zeroed_network("gru")
        v = np.array([0.8, -0.4, 0.2])
        h, gates = gru_cell(net.params, np.array([1.5]), v)
        assert np.allclose(gates.z, 0.5) and np.allclose(gates.r, 0.5)
        assert np.all(gates.h_tilde == 0.0)
        assert h == pytest.approx(0.5 * v)

    def test_zero_fixed_point(self):
        net = zeroed_network("gru")
        h, _ = gru_cell(net.params, np.array([2.0]), np.zeros(3))
        assert np.all(h == 0.0)

    def test_matches_scalar_oracle(self):
        net = create_network("gru", 1, 1, seed=5)
        p = net.params
        sig = lambda v: 1.0 / (1.0 + math.exp(-v))
        x, h_prev = -0.3, 0.5
        z = sig(p.w_xz[0, 0] * x + p.w_hz[0, 0] * h_prev + p.b_z[0])
        r = sig(p.w_xr[0, 0] * x + p.w_hr[0, 0] * h_prev + p.b_r[0])
        h_tilde = math.tanh(p.w_xh[0, 0] * x + r * (p.w_hh[0, 0] * h_prev) + p.b_h[0])
        expected = (1 - z) * h_prev + z * h_tilde
        h, _ = gru_cell(p, np.array([x]), np.array([h_prev]))
        assert abs(h[0] - expected) < 1e-12

    def test_convex_combination_bound(self):
        rng = np.random.default_rng(6)
        net = create_network("gru", 5, 1, seed=6)
        h = rng.uniform(-2, 2, 5)
        for _ in range(20):
            h_new, _ = gru_cell(net.params, rng.uniform(-3, 3, 1), h)
            assert np.all(np.abs(h_new) <= np.maximum(np.abs(h), 1.0) + 1e-15)
            h = h_new


class TestForward:
    def test_dead_network_outputs_bias(self):
        net = zeroed_network("lstm")
        net.head_b[...] = 0.25
        pred, _ = forward(net, np.array([0.1, 0.9, 0.4]))
        assert pred == 0.25

    def test_single_step_equals_cell_plus_head(self):
        net = create_network("lstm", 4, 1, seed=8)
        x = np.array([0.3])
        state = lstm_cell(net.params, x, zero_lstm_state(4))
        expected = float(state.h @ net.head_w + net.head_b)
        pred, _ = forward(net, x)
        assert pred == pytest.approx(expected, abs=1e-14)

    def test_matches_unrolled_cell_oracle(self):
        for kind in ("lstm", "gru"):
            net = create_network(kind, 5, 1, seed=9)
            window = np.array([0.1, 0.2, 0.3])
            if kind == "lstm":
                state = zero_lstm_state(5)
                for v in window:
                    state = lstm_cell(net.params, np.array([v]), state)
                expected = float(state.h @ net.head_w + net.head_b)
            else:
                h = np.zeros(5)
                for v in window:
                    h, _ = gru_cell(net.params, np.array([v]), h)
                expected = float(h @ net.head_w + net.head_b)
            pred, _ = forward(net, window)
            assert abs(pred - expected) < 1e-12

    def test_cell_eval_counter(self):
        net = create_network("gru", 3, 1, seed=10)
        _, cache = forward(net, np.linspace(0, 1, 7))
        assert cache.cell_evals == 7

    def test_empty_window(self):
        net = create_network("lstm", 3, 1, seed=0)
        with pytest.raises(RecurrentError, match="empty"):
            forward(net, np.array([]))


class TestBptt:
    def test_zero_loss_zero_gradients(self):
        net = zeroed_network("lstm")
        inputs = np.array([[0.2, 0.4], [0.1, 0.3]])
        targets = np.zeros(2)  # dead net predicts head_b = 0 exactly
        grads, loss = bptt_gradients(net, inputs, targets)
        assert loss == 0.0
        assert all(np.all(g == 0.0) for g in grads.values())

    def test_duplicated_batch_same_average(self):
        for kind in ("lstm", "gru"):
            net = create_network(kind, 4, 1, seed=11)
            rng = np.random.default_rng(11)
            inputs = rng.uniform(0, 1, (3, 6))
            targets = rng.uniform(0, 1, 3)
            g1, loss1 = bptt_gradients(net, inputs, targets)
            g2, loss2 = bptt_gradients(
                net, np.repeat(inputs, 2, axis=0), np.repeat(targets, 2)
            )
            assert loss2 == pytest.approx(loss1, rel=1e-12)
            for name in g1:
                assert np.allclose(g1[name], g2[name], rtol=1e-12, atol=1e-15)

    def test_clip_norm_applied(self):
        net = create_network("lstm", 4, 1, seed=12)
        rng = np.random.default_rng(12)
        inputs = rng.uniform(0, 1, (8, 5))
        targets = rng.uniform(40, 50, 8)  # large errors force a big norm
        grads, _ = bptt_gradients(net, inputs, targets, clip_norm=1.0)
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        assert norm == pytest.approx(1.0, rel=1e-9)

    def test_empty_batch(self):
        net = create_network("lstm", 3, 1, seed=0)
        with pytest.raises(RecurrentError):
            bptt_gradients(net, np.empty((0, 4)), np.empty(0))


class TestAdam:
    def _config(self, lr=0.1):
        return TrainConfig(epochs=1, learning_rate=lr)

    def test_zero_gradient_fixed_point(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState.for_params(params)
        adam_step(state, params, {"w": np.zeros(2)}, self._config())
        assert params["w"].tolist() == [1.0, -2.0]

    def test_first_step_is_signed_lr(self):
        params = {"w": np.array([0.0, 0.0])}
        state = AdamState.for_params(params)
        grads = {"w": np.array([0.5, -3.0])}
        adam_step(state, params, grads, self._config(lr=0.01))
        assert params["w"] == pytest.approx([-0.01, 0.01], rel=1e-6)

    def test_quadratic_descent(self):
        params = {"w": np.array(1.0)}
        state = AdamState.for_params(params)
        config = self._config(lr=0.1)
        for _ in range(100):
            adam_step(state, params, {"w": np.asarray(2.0 * params["w"])}, config)
        assert abs(float(params["w"])) < 0.05

    def test_non_finite_gradients(self):
        params = {"w": np.array([1.0])}
        state = AdamState.for_params(params)
        with pytest.raises(RecurrentError, match="non-finite"):
            adam_step(state, params, {"w": np.array([np.inf])}, self._config())


class TestTrain:
    def _sine_windows(self, n=400, w=30):
        values = sine_values(n)
        scaler = fit_minmax(values)
        return make_windows(scaler.transform(values), w)

    def test_sine_benchmark_lstm(self):
        data = self._sine_windows()
        net = create_network("lstm", 64, 1, seed=7)
        result = train(net, data, TrainConfig(epochs=100, learning_rate=1e-3, seed=7))
        assert result.loss_history[-1] < 0.01
        assert result.loss_history[-1] < result.loss_history[0]

    def test_sine_benchmark_gru(self):
        data = self._sine_windows()
        net = create_network("gru", 64, 1, seed=7)
        result = train(net, data, TrainConfig(epochs=100, learning_rate=1e-3, seed=7))
        assert result.loss_history[-1] < 0.01

    def test_epoch_zero_rejected(self):
        with pytest.raises(RecurrentError, match="epochs"):
            TrainConfig(epochs=0)

    def test_one_epoch_step_count(self):
        data = self._sine_windows(n=100, w=10)  # 90 samples
        net = create_network("gru", 4, 1, seed=1)
        result = train(net, data, TrainConfig(epochs=1, batch_size=32))
        assert result.steps == math.ceil(90 / 32)
        assert len(result.loss_history) == 1

    def test_bitwise_determinism(self):
        data = self._sine_windows(n=120, w=10)
        runs = []
        for _ in range(2):
            net = create_network("lstm", 8, 1, seed=13)
            result = train(net, data, TrainConfig(epochs=2, seed=13))
            runs.append(params_dict(result.network, copy=True))
        for name in runs[0]:
            assert np.array_equal(runs[0][name], runs[1][name])

    def test_input_network_untouched(self):
        data = self._sine_windows(n=80, w=8)
        net = create_network("gru", 4, 1, seed=2)
        before = params_dict(net, copy=True)
        train(net, data, TrainConfig(epochs=1))
        after = params_dict(net)
        for name in before:
            assert np.array_equal(before[name], after[name])

    def test_divergence_reports_epoch(self):
        data = self._sine_windows(n=80, w=8)
        net = create_network("lstm", 4, 1, seed=3)
        net.params.w_xi[0, 0] = np.nan
        with pytest.raises(RecurrentError, match="epoch 0"):
            train(net, data, TrainConfig(epochs=1))

    def test_empty_data(self):
        net = create_network("lstm", 4, 1, seed=0)
        data = self._sine_windows(n=50, w=10)
        data.inputs = data.inputs[:0]
        data.targets = data.targets[:0]
        with pytest.raises(RecurrentError, match="empty"):
            train(net, data, TrainConfig(epochs=1))


class TestGradCheck:
    def test_lstm_small(self):
        rng = np.random.default_rng(20)
        net = create_network("lstm", 4, 1, seed=20)
        assert grad_check(net, rng.uniform(0, 1, 8), rng.uniform()) < 1e-4

    def test_gru_small(self):
        rng = np.random.default_rng(21)
        net = create_network("gru", 4, 1, seed=21)
        assert grad_check(net, rng.uniform(0, 1, 8), rng.uniform()) < 1e-4

    def test_dead_network_guarded(self):
        net = zeroed_network("lstm", hidden=2)
        result = grad_check(net, np.array([0.5, 0.5]), 0.0)
        assert np.isfinite(result)

    def test_eps_bounds(self):
        net = create_network("lstm", 2, 1, seed=0)
        with pytest.raises(RecurrentError):
            grad_check(net, np.array([0.5]), 0.0, eps=1e-2)


class TestSerialization:
    def test_roundtrip(self):
        for kind in ("lstm", "gru"):
            net = create_network(kind, 5, 1, seed=30)
            again = network_from_json(network_to_json(net))
            assert again.cell_kind == net.cell_kind
            assert again.seed == net.seed
            original = params_dict(net)
            restored = params_dict(again)
            for name in original:
                assert np.array_equal(original[name], restored[name])
            window = np.linspace(0, 1, 6)
            assert forward(net, window)[0] == forward(again, window)[0]

    def test_batch_forward_matches_single(self):
        net = create_network("gru", 6, 1, seed=31)
        rng = np.random.default_rng(31)
        windows = rng.uniform(0, 1, (5, 9))
        batched = forward_batch(net, windows)
        singles = [forward(net, w)[0] for w in windows]
        assert batched == pytest.approx(singles, abs=1e-12)
