"""From-scratch LSTM and GRU cells with BPTT, Adam training, gradient checks.

Everything runs in float64.  A network maps a window of scaled values to a
single one-step-ahead prediction through a linear head on the final hidden
state.  Cell operations accept either a single vector state or a batch
(rows are samples), so training uses the same code path as inference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .preprocess import WindowedDataset

LSTM_FIELDS = (
    "w_xi", "w_xf", "w_xg", "w_xo",
    "w_hi", "w_hf", "w_hg", "w_ho",
    "b_i", "b_f", "b_g", "b_o",
)
GRU_FIELDS = (
    "w_xz", "w_xr", "w_xh",
    "w_hz", "w_hr", "w_hh",
    "b_z", "b_r", "b_h",
)
HEAD_FIELDS = ("head_w", "head_b")


class RecurrentError(ValueError):
    """Invalid network input or diverged training."""


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(eq=False)
class LstmParams:
    w_xi: np.ndarray
    w_xf: np.ndarray
    w_xg: np.ndarray
    w_xo: np.ndarray
    w_hi: np.ndarray
    w_hf: np.ndarray
    w_hg: np.ndarray
    w_ho: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray
    hidden_size: int
    input_size: int


@dataclass(eq=False)
class GruParams:
    w_xz: np.ndarray
    w_xr: np.ndarray
    w_xh: np.ndarray
    w_hz: np.ndarray
    w_hr: np.ndarray
    w_hh: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray
    hidden_size: int
    input_size: int


@dataclass(eq=False)
class LstmState:
    """Hidden and cell state plus the gate activations kept for backprop."""

    h: np.ndarray
    c: np.ndarray
    gates: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]  # (i, f, g, o)


@dataclass(eq=False)
class GruGates:
    z: np.ndarray
    r: np.ndarray
    h_tilde: np.ndarray
    hh_lin: np.ndarray  # w_hh @ h_prev, reused in the reset-gate gradient


def _check_input(x: np.ndarray, expected: int, label: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != expected:
        raise RecurrentError(f"{label} has size {x.shape[-1]}, expected {expected}")
    if not np.all(np.isfinite(x)):
        raise RecurrentError(f"non-finite {label}")
    return x


def lstm_cell(params: LstmParams, x, prev: LstmState) -> LstmState:
    """One LSTM step.

    i = sig(Wxi x + Whi h + bi); f, o likewise; g = tanh(Wxg x + Whg h + bg);
    c = f*c_prev + i*g; h = o*tanh(c).
    """
    x = _check_input(x, params.input_size, "input")
    h_prev = _check_input(prev.h, params.hidden_size, "hidden state")
    c_prev = np.asarray(prev.c, dtype=float)
    i = _sigmoid(x @ params.w_xi.T + h_prev @ params.w_hi.T + params.b_i)
    f = _sigmoid(x @ params.w_xf.T + h_prev @ params.w_hf.T + params.b_f)
    g = np.tanh(x @ params.w_xg.T + h_prev @ params.w_hg.T + params.b_g)
    o = _sigmoid(x @ params.w_xo.T + h_prev @ params.w_ho.T + params.b_o)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return LstmState(h=h, c=c, gates=(i, f, g, o))


def gru_cell(params: GruParams, x, h_prev) -> tuple[np.ndarray, GruGates]:
    """One GRU step.

    z = sig(.); r = sig(.); h~ = tanh(Wxh x + r*(Whh h_prev) + bh);
    h = (1-z)*h_prev + z*h~.
    """
    x = _check_input(x, params.input_size, "input")
    h_prev = _check_input(h_prev, params.hidden_size, "hidden state")
    z = _sigmoid(x @ params.w_xz.T + h_prev @ params.w_hz.T + params.b_z)
    r = _sigmoid(x @ params.w_xr.T + h_prev @ params.w_hr.T + params.b_r)
    hh_lin = h_prev @ params.w_hh.T
    h_tilde = np.tanh(x @ params.w_xh.T + r * hh_lin + params.b_h)
    h = (1.0 - z) * h_prev + z * h_tilde
    return h, GruGates(z=z, r=r, h_tilde=h_tilde, hh_lin=hh_lin)


@dataclass(eq=False)
class RecurrentNetwork:
    """A recurrent cell plus a scalar linear output head."""

    cell_kind: str  # "lstm" or "gru"
    params: LstmParams | GruParams
    head_w: np.ndarray
    head_b: np.ndarray  # 0-d array
    seed: int

    @property
    def hidden_size(self) -> int:
        return self.params.hidden_size

    @property
    def input_size(self) -> int:
        return self.params.input_size


def create_network(
    cell_kind: str, hidden_size: int, input_size: int = 1, seed: int = 0
) -> RecurrentNetwork:
    """Build a network with all parameters uniform in +-1/sqrt(hidden_size).

    Draw order is the documented field order, so a seed fully determines
    the weights.
    """
    kind = cell_kind.lower()
    if kind not in ("lstm", "gru"):
        raise RecurrentError(f"unknown cell kind {cell_kind!r}")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(hidden_size)

    def draw(*shape):
        return rng.uniform(-bound, bound, size=shape)

    if kind == "lstm":
        params = LstmParams(
            w_xi=draw(hidden_size, input_size),
            w_xf=draw(hidden_size, input_size),
            w_xg=draw(hidden_size, input_size),
            w_xo=draw(hidden_size, input_size),
            w_hi=draw(hidden_size, hidden_size),
            w_hf=draw(hidden_size, hidden_size),
            w_hg=draw(hidden_size, hidden_size),
            w_ho=draw(hidden_size, hidden_size),
            b_i=draw(hidden_size),
            b_f=draw(hidden_size),
            b_g=draw(hidden_size),
            b_o=draw(hidden_size),
            hidden_size=hidden_size,
            input_size=input_size,
        )
    else:
        params = GruParams(
            w_xz=draw(hidden_size, input_size),
            w_xr=draw(hidden_size, input_size),
            w_xh=draw(hidden_size, input_size),
            w_hz=draw(hidden_size, hidden_size),
            w_hr=draw(hidden_size, hidden_size),
            w_hh=draw(hidden_size, hidden_size),
            b_z=draw(hidden_size),
            b_r=draw(hidden_size),
            b_h=draw(hidden_size),
            hidden_size=hidden_size,
            input_size=input_size,
        )
    return RecurrentNetwork(
        cell_kind=kind,
        params=params,
        head_w=draw(hidden_size),
        head_b=np.asarray(rng.uniform(-bound, bound)),
        seed=seed,
    )


def _cell_fields(net: RecurrentNetwork) -> tuple[str, ...]:
    return LSTM_FIELDS if net.cell_kind == "lstm" else GRU_FIELDS


def params_dict(net: RecurrentNetwork, copy: bool = False) -> dict[str, np.ndarray]:
    """Name-to-array view (or copy) of every trainable parameter."""
    out = {name: getattr(net.params, name) for name in _cell_fields(net)}
    out["head_w"] = net.head_w
    out["head_b"] = net.head_b
    if copy:
        out = {k: np.array(v) for k, v in out.items()}
    return out


def _clone_network(net: RecurrentNetwork) -> RecurrentNetwork:
    fields = {name: np.array(getattr(net.params, name)) for name in _cell_fields(net)}
    params = replace(net.params, **fields)
    return RecurrentNetwork(
        cell_kind=net.cell_kind,
        params=params,
        head_w=np.array(net.head_w),
        head_b=np.array(net.head_b),
        seed=net.seed,
    )


@dataclass(eq=False)
class ForwardCache:
    """Per-step values retained for backpropagation through time."""

    xs: list
    h_prevs: list
    states: list  # LstmState per step, or (h, GruGates) per step
    h_final: np.ndarray
    predictions: np.ndarray
    cell_evals: int


def _forward_batch(net: RecurrentNetwork, windows: np.ndarray) -> ForwardCache:
    windows = np.asarray(windows, dtype=float)
    batch, w = windows.shape
    if w == 0:
        raise RecurrentError("empty window")
    hidden = net.hidden_size
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    xs, h_prevs, states = [], [], []
    evals = 0
    for t in range(w):
        x = windows[:, t : t + 1]
        xs.append(x)
        h_prevs.append(h)
        if net.cell_kind == "lstm":
            state = lstm_cell(net.params, x, LstmState(h=h, c=c, gates=()))
            h, c = state.h, state.c
        else:
            h, state = gru_cell(net.params, x, h)
        states.append(state)
        evals += 1
    predictions = h @ net.head_w + net.head_b
    return ForwardCache(
        xs=xs,
        h_prevs=h_prevs,
        states=states,
        h_final=h,
        predictions=predictions,
        cell_evals=evals,
    )


def forward(net: RecurrentNetwork, window) -> tuple[float, ForwardCache]:
    """Run one window through the net; returns the scalar prediction and the
    cached states (exactly one cell evaluation per window element)."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 1:
        raise RecurrentError(f"window must be 1-D, got shape {window.shape}")
    cache = _forward_batch(net, window[None, :])
    return float(cache.predictions[0]), cache


def forward_batch(net: RecurrentNetwork, windows) -> np.ndarray:
    """Predictions for a batch of windows (rows), without keeping the cache."""
    windows = np.asarray(windows, dtype=float)
    if windows.ndim != 2:
        raise RecurrentError(f"windows must be 2-D, got shape {windows.shape}")
    return _forward_batch(net, windows).predictions


def _zero_grads(net: RecurrentNetwork) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params_dict(net).items()}


def _bptt_lstm(net, cache, dh, grads):
    p = net.params
    dc = np.zeros_like(dh)
    for t in range(len(cache.xs) - 1, -1, -1):
        state = cache.states[t]
        i, f, g, o = state.gates
        c = state.c
        x, h_prev = cache.xs[t], cache.h_prevs[t]
        c_prev = cache.states[t - 1].c if t > 0 else np.zeros_like(c)
        tanh_c = np.tanh(c)
        da_o = dh * tanh_c * o * (1.0 - o)
        dc = dc + dh * o * (1.0 - tanh_c**2)
        da_i = dc * g * i * (1.0 - i)
        da_f = dc * c_prev * f * (1.0 - f)
        da_g = dc * i * (1.0 - g**2)
        grads["w_xi"] += da_i.T @ x
        grads["w_xf"] += da_f.T @ x
        grads["w_xg"] += da_g.T @ x
        grads["w_xo"] += da_o.T @ x
        grads["w_hi"] += da_i.T @ h_prev
        grads["w_hf"] += da_f.T @ h_prev
        grads["w_hg"] += da_g.T @ h_prev
        grads["w_ho"] += da_o.T @ h_prev
        grads["b_i"] += da_i.sum(axis=0)
        grads["b_f"] += da_f.sum(axis=0)
        grads["b_g"] += da_g.sum(axis=0)
        grads["b_o"] += da_o.sum(axis=0)
        dh = da_i @ p.w_hi + da_f @ p.w_hf + da_g @ p.w_hg + da_o @ p.w_ho
        dc = dc * f


def _bptt_gru(net, cache, dh, grads):
    p = net.params
    for t in range(len(cache.xs) - 1, -1, -1):
        gates: GruGates = cache.states[t]
        z, r, h_tilde, hh_lin = gates.z, gates.r, gates.h_tilde, gates.hh_lin
        x, h_prev = cache.xs[t], cache.h_prevs[t]
        da_z = dh * (h_tilde - h_prev) * z * (1.0 - z)
        da_h = dh * z * (1.0 - h_tilde**2)
        da_r = da_h * hh_lin * r * (1.0 - r)
        grads["w_xz"] += da_z.T @ x
        grads["w_xr"] += da_r.T @ x
        grads["w_xh"] += da_h.T @ x
        grads["w_hz"] += da_z.T @ h_prev
        grads["w_hr"] += da_r.T @ h_prev
        grads["w_hh"] += (da_h * r).T @ h_prev
        grads["b_z"] += da_z.sum(axis=0)
        grads["b_r"] += da_r.sum(axis=0)
        grads["b_h"] += da_h.sum(axis=0)
        dh = dh * (1.0 - z) + da_z @ p.w_hz + da_r @ p.w_hr + (da_h * r) @ p.w_hh


def bptt_gradients(
    net: RecurrentNetwork,
    inputs: np.ndarray,
    targets: np.ndarray,
    clip_norm: float | None = None,
) -> tuple[dict[str, np.ndarray], float]:
    """Exact reverse-mode gradients of the batch-mean squared error.

    Gradients are averaged over the batch; when ``clip_norm`` is given the
    global gradient norm is clipped to it.
    """
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if inputs.ndim != 2 or len(inputs) == 0:
        raise RecurrentError("batch must be a non-empty 2-D array")
    batch = len(inputs)
    cache = _forward_batch(net, inputs)
    err = cache.predictions - targets
    loss = float(err @ err) / batch
    if not np.isfinite(loss):
        raise RecurrentError("non-finite loss: training diverged")

    dpred = 2.0 * err / batch
    grads = _zero_grads(net)
    grads["head_w"] = cache.h_final.T @ dpred
    grads["head_b"] = np.asarray(dpred.sum())
    dh = np.outer(dpred, net.head_w)
    if net.cell_kind == "lstm":
        _bptt_lstm(net, cache, dh, grads)
    else:
        _bptt_gru(net, cache, dh, grads)

    if clip_norm is not None:
        total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if total > clip_norm:
            scale = clip_norm / total
            for name in grads:
                grads[name] = grads[name] * scale
    return grads, loss


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    grad_clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise RecurrentError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise RecurrentError("learning rate must be positive")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise RecurrentError("beta1 and beta2 must lie in (0, 1)")
        if self.batch_size < 1:
            raise RecurrentError("batch size must be >= 1")


@dataclass(eq=False)
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
        )


def adam_step(
    state: AdamState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    config: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """Bias-corrected Adam update; parameters are updated in place."""
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise RecurrentError("non-finite gradients")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for name, grad in grads.items():
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * grad
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * grad * grad
        m_hat = state.m[name] / correction1
        v_hat = state.v[name] / correction2
        params[name] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps_adam)
    return params, state


@dataclass(eq=False)
class TrainResult:
    network: RecurrentNetwork
    loss_history: list[float]
    steps: int


def train(
    net: RecurrentNetwork, data: WindowedDataset, config: TrainConfig
) -> TrainResult:
    """Train on chronological mini-batches (no shuffling); deterministic.

    The input network is left untouched; a trained copy is returned together
    with the mean batch loss per epoch.

    Raises:
        RecurrentError: divergence (non-finite loss), reported with its epoch.
    """
    if len(data) == 0:
        raise RecurrentError("training data is empty")
    work = _clone_network(net)
    params = params_dict(work)
    state = AdamState.for_params(params)
    n = len(data)
    history: list[float] = []
    for epoch in range(config.epochs):
        losses = []
        for start in range(0, n, config.batch_size):
            stop = min(start + config.batch_size, n)
            try:
                grads, loss = bptt_gradients(
                    work,
                    data.inputs[start:stop],
                    data.targets[start:stop],
                    clip_norm=config.grad_clip_norm,
                )
            except RecurrentError as exc:
                raise RecurrentError(f"epoch {epoch}: {exc}") from None
            losses.append(loss)
            adam_step(state, params, grads, config)
        history.append(float(np.mean(losses)))
    return TrainResult(network=work, loss_history=history, steps=state.t)


def grad_check(net: RecurrentNetwork, window, target: float, eps: float = 1e-5) -> float:
    """Worst relative error of analytic vs central-difference gradients on
    one sample.  Denominators are guarded so dead parameters do not blow up."""
    if not 1e-7 <= eps <= 1e-3:
        raise RecurrentError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    window = np.asarray(window, dtype=float)
    inputs = window[None, :]
    targets = np.asarray([target], dtype=float)
    analytic, _ = bptt_gradients(net, inputs, targets)

    work = _clone_network(net)
    params = params_dict(work)

    def loss_now() -> float:
        cache = _forward_batch(work, inputs)
        err = cache.predictions - targets
        return float(err @ err)

    worst = 0.0
    for name, arr in params.items():
        flat = arr.reshape(-1)  # view, so the perturbation reaches the net
        grad_flat = np.asarray(analytic[name]).reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            up = loss_now()
            flat[idx] = original - eps
            down = loss_now()
            flat[idx] = original
            numeric = (up - down) / (2.0 * eps)
            a = grad_flat[idx]
            rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst


def network_to_json(net: RecurrentNetwork) -> str:
    """Tensor dump with shape headers; fields appear in the documented order."""
    tensors = {}
    for name, arr in params_dict(net).items():
        arr = np.asarray(arr)
        tensors[name] = {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
    payload = {
        "cell_kind": net.cell_kind,
        "hidden_size": net.hidden_size,
        "input_size": net.input_size,
        "seed": net.seed,
        "params": tensors,
    }
    return json.dumps(payload, indent=2)


def network_from_json(text: str) -> RecurrentNetwork:
    raw = json.loads(text)
    kind = raw["cell_kind"]
    hidden, inp = int(raw["hidden_size"]), int(raw["input_size"])

    def tensor(name):
        entry = raw["params"][name]
        return np.asarray(entry["data"], dtype=float).reshape(entry["shape"])

    fields = LSTM_FIELDS if kind == "lstm" else GRU_FIELDS
    cls = LstmParams if kind == "lstm" else GruParams
    params = cls(
        **{name: tensor(name) for name in fields},
        hidden_size=hidden,
        input_size=inp,
    )
    return RecurrentNetwork(
        cell_kind=kind,
        params=params,
        head_w=tensor("head_w"),
        head_b=tensor("head_b"),
        seed=int(raw["seed"]),
    )
