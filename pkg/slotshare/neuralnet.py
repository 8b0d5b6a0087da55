"""Recurrent branching dueling Q-network in numpy, with analytic gradients and Adam.

Layout of one forward pass::

    x --LSTM--> h --dense/relu--> dense --> V
                 \--K_max dense branches--> A_j (width N+1)
    Q[a, j] = V + A_j[a] - mean(A_j)

Training truncates backpropagation at the carried LSTM state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .exceptions import ShapeError

Params = Dict[str, np.ndarray]


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class LstmState:
    """Carried (h, c) of an LSTM; rows are batch entries."""

    h: np.ndarray
    c: np.ndarray

    def copy(self) -> "LstmState":
        return LstmState(self.h.copy(), self.c.copy())


class Dense:
    """Affine map ``y = x W^T + b``."""

    def __init__(self, in_size: int, out_size: int, rng: np.random.Generator) -> None:
        self.in_size = in_size
        self.out_size = out_size
        self.params: Params = {"W": _glorot(rng, out_size, in_size), "b": np.zeros(out_size)}

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if x.shape[-1] != self.in_size:
            raise ShapeError(f"Dense expects {self.in_size} inputs, got {x.shape[-1]}")
        return x @ self.params["W"].T + self.params["b"], x

    def backward(self, dy: np.ndarray, cache: np.ndarray) -> Tuple[np.ndarray, Params]:
        x = cache
        grads = {"W": dy.T @ x, "b": dy.sum(axis=0)}
        return dy @ self.params["W"], grads


class LstmLayer:
    """Single LSTM cell; gate rows are ordered input, forget, candidate, output."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator) -> None:
        self.input_size = input_size
        self.hidden_size = hidden_size
        h = hidden_size
        bias = np.zeros(4 * h)
        bias[h : 2 * h] = 1.0
        self.params: Params = {
            "W": np.vstack([_glorot(rng, h, input_size) for _ in range(4)]),
            "U": np.vstack([_glorot(rng, h, h) for _ in range(4)]),
            "b": bias,
        }

    def initial_state(self, batch: int | None = None) -> LstmState:
        shape = (self.hidden_size,) if batch is None else (batch, self.hidden_size)
        return LstmState(np.zeros(shape), np.zeros(shape))

    def step(self, x: np.ndarray, state: LstmState) -> Tuple[LstmState, tuple]:
        if x.shape[-1] != self.input_size:
            raise ShapeError(f"LSTM expects {self.input_size} inputs, got {x.shape[-1]}")
        if state.h.shape[-1] != self.hidden_size or state.c.shape != state.h.shape:
            raise ShapeError(f"LSTM state must have {self.hidden_size} units")
        p = self.params
        n = self.hidden_size
        z = x @ p["W"].T + state.h @ p["U"].T + p["b"]
        i = _sigmoid(z[..., :n])
        f = _sigmoid(z[..., n : 2 * n])
        g = np.tanh(z[..., 2 * n : 3 * n])
        o = _sigmoid(z[..., 3 * n :])
        c = f * state.c + i * g
        tc = np.tanh(c)
        h = o * tc
        return LstmState(h, c), (x, state.h, state.c, i, f, g, o, tc)

    def backward(self, dh: np.ndarray, cache: tuple) -> Tuple[np.ndarray, Params]:
        x, h0, c0, i, f, g, o, tc = cache
        do = dh * tc
        dc = dh * o * (1.0 - tc**2)
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c0 * f * (1.0 - f),
                dc * i * (1.0 - g**2),
                do * o * (1.0 - o),
            ],
            axis=-1,
        )
        grads = {"W": dz.T @ x, "U": dz.T @ h0, "b": dz.sum(axis=0)}
        return dz @ self.params["W"], grads


def dueling_combine(value: np.ndarray | float, branch_adv: np.ndarray) -> np.ndarray:
    """Q[a, j] = V + A_j[a] - mean_a' A_j[a'].

    ``branch_adv`` is (K_max, N+1), or (B, K_max, N+1) with ``value`` of shape (B,).
    The result is (N+1, K_max), or (B, N+1, K_max).
    """

    adv = np.asarray(branch_adv, dtype=float)
    normalized = adv - adv.mean(axis=-1, keepdims=True)
    value = np.asarray(value, dtype=float)
    if adv.ndim == 2:
        return float(value) + normalized.T
    return value[:, None, None] + normalized.transpose(0, 2, 1)


class BranchingDuelingHead:
    """Value stream (H -> hidden -> 1, relu) and K_max advantage branches of width N+1."""

    def __init__(
        self, hidden_size: int, value_hidden: int, n_rbs: int, k_max: int, rng: np.random.Generator
    ) -> None:
        self.hidden_size = hidden_size
        self.n_rbs = n_rbs
        self.k_max = k_max
        self.value_hidden = Dense(hidden_size, value_hidden, rng)
        self.value_out = Dense(value_hidden, 1, rng)
        limit = np.sqrt(6.0 / (hidden_size + n_rbs + 1))
        self.params: Params = {
            "Wa": rng.uniform(-limit, limit, size=(k_max, n_rbs + 1, hidden_size)),
            "ba": np.zeros((k_max, n_rbs + 1)),
        }

    def forward(self, h: np.ndarray) -> Tuple[np.ndarray, tuple]:
        z1, c1 = self.value_hidden.forward(h)
        r = np.maximum(z1, 0.0)
        v, c2 = self.value_out.forward(r)
        adv = np.einsum("bh,kah->bka", h, self.params["Wa"]) + self.params["ba"]
        q = dueling_combine(v[:, 0], adv)
        return q, (h, z1, c1, c2)

    def backward(self, dq: np.ndarray, cache: tuple) -> Tuple[np.ndarray, Params]:
        h, z1, c1, c2 = cache
        dv = dq.sum(axis=(1, 2))[:, None]
        db = dq.transpose(0, 2, 1)
        da = db - db.mean(axis=2, keepdims=True)
        grads: Params = {
            "Wa": np.einsum("bka,bh->kah", da, h),
            "ba": da.sum(axis=0),
        }
        dh = np.einsum("bka,kah->bh", da, self.params["Wa"])
        dr, g_out = self.value_out.backward(dv, c2)
        dz1 = dr * (z1 > 0)
        dh_value, g_hidden = self.value_hidden.backward(dz1, c1)
        grads.update({f"value_out.{k}": v for k, v in g_out.items()})
        grads.update({f"value_hidden.{k}": v for k, v in g_hidden.items()})
        return dh + dh_value, grads

    def parameters(self) -> Params:
        params = dict(self.params)
        params.update({f"value_hidden.{k}": v for k, v in self.value_hidden.params.items()})
        params.update({f"value_out.{k}": v for k, v in self.value_out.params.items()})
        return params


class BranchingDuelingNet:
    """LSTM core followed by a branching dueling head; outputs a (N+1) x K_max Q-matrix."""

    def __init__(
        self,
        input_size: int,
        n_rbs: int,
        k_max: int,
        lstm_hidden: int = 64,
        value_hidden: int = 32,
        seed: int | np.random.Generator | None = 0,
    ) -> None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.input_size = input_size
        self.n_rbs = n_rbs
        self.k_max = k_max
        self.lstm_hidden = lstm_hidden
        self.value_hidden = value_hidden
        self.lstm = LstmLayer(input_size, lstm_hidden, rng)
        self.head = BranchingDuelingHead(lstm_hidden, value_hidden, n_rbs, k_max, rng)

    @property
    def q_shape(self) -> Tuple[int, int]:
        return (self.n_rbs + 1, self.k_max)

    def parameters(self) -> Params:
        params = {f"lstm.{k}": v for k, v in self.lstm.params.items()}
        params.update({f"head.{k}": v for k, v in self.head.parameters().items()})
        return params

    def initial_state(self, batch: int | None = None) -> LstmState:
        return self.lstm.initial_state(batch)

    def forward_batch(self, x: np.ndarray, state: LstmState) -> Tuple[np.ndarray, LstmState, tuple]:
        if x.ndim != 2 or x.shape[1] != self.input_size:
            raise ShapeError(f"Expected input of shape (B, {self.input_size}), got {x.shape}")
        new_state, lstm_cache = self.lstm.step(x, state)
        q, head_cache = self.head.forward(new_state.h)
        return q, new_state, (lstm_cache, head_cache)

    def loss_and_gradients(
        self, x: np.ndarray, state: LstmState, target: np.ndarray, mask: np.ndarray
    ) -> Tuple[float, Params]:
        """Masked mean-squared error and its gradients, truncated at ``state``."""

        q, _, (lstm_cache, head_cache) = self.forward_batch(x, state)
        if target.shape != q.shape or mask.shape != q.shape:
            raise ShapeError(f"Target and mask must have shape {q.shape}")
        resid = (q - target) * mask
        counts = np.maximum(mask.sum(axis=(1, 2)), 1.0)
        batch = q.shape[0]
        loss = float(np.mean((resid**2).sum(axis=(1, 2)) / counts))
        dq = 2.0 * resid / counts[:, None, None] / batch
        dh, head_grads = self.head.backward(dq, head_cache)
        _, lstm_grads = self.lstm.backward(dh, lstm_cache)
        grads = {f"lstm.{k}": v for k, v in lstm_grads.items()}
        grads.update({f"head.{k}": v for k, v in head_grads.items()})
        return loss, grads

    def copy_from(self, other: "BranchingDuelingNet") -> None:
        mine = self.parameters()
        for name, value in other.parameters().items():
            if mine[name].shape != value.shape:
                raise ShapeError(f"Parameter {name} shape {value.shape} != {mine[name].shape}")
            mine[name][...] = value


def lstm_step(layer: LstmLayer, x: np.ndarray, state: LstmState) -> Tuple[np.ndarray, LstmState]:
    new_state, _ = layer.step(x, state)
    return new_state.h, new_state


def forward(net: BranchingDuelingNet, encoded: np.ndarray, state: LstmState) -> Tuple[np.ndarray, LstmState]:
    """Q-matrix for one encoded observation and the advanced carried state."""

    if encoded.shape != (net.input_size,):
        raise ShapeError(f"Expected encoded input of length {net.input_size}, got {encoded.shape}")
    batch_state = LstmState(state.h[None, :], state.c[None, :])
    q, new_state, _ = net.forward_batch(encoded[None, :], batch_state)
    return q[0], LstmState(new_state.h[0], new_state.c[0])


def backward(
    net: BranchingDuelingNet,
    encoded: np.ndarray,
    state: LstmState,
    target: np.ndarray,
    mask: np.ndarray,
) -> Tuple[float, Params]:
    """Masked-MSE gradients for a batch of (encoded, carried state, target, mask)."""

    if encoded.ndim == 1:
        encoded = encoded[None, :]
        state = LstmState(state.h[None, :], state.c[None, :])
        target = target[None, ...]
        mask = mask[None, ...]
    return net.loss_and_gradients(encoded, state, target, mask.astype(float))


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)


def adam_update(params: Params, grads: Params, state: AdamState, lr: float) -> Params:
    """One bias-corrected Adam step, applied in place."""

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name, grad in grads.items():
        param = params[name]
        if param.shape != grad.shape:
            raise ShapeError(f"Gradient {name} shape {grad.shape} != {param.shape}")
        m = state.m.setdefault(name, np.zeros_like(param))
        v = state.v.setdefault(name, np.zeros_like(param))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad**2
        param -= lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return params


_META_KEY = "__architecture__"


def save_snapshot(net: BranchingDuelingNet, path: str | Path) -> None:
    meta = np.array([net.input_size, net.n_rbs, net.k_max, net.lstm_hidden, net.value_hidden])
    np.savez(Path(path), **{_META_KEY: meta}, **net.parameters())


def load_snapshot(path: str | Path) -> BranchingDuelingNet:
    with np.load(Path(path)) as data:
        input_size, n_rbs, k_max, lstm_hidden, value_hidden = (int(v) for v in data[_META_KEY])
        net = BranchingDuelingNet(input_size, n_rbs, k_max, lstm_hidden, value_hidden, seed=0)
        params = net.parameters()
        for name in params:
            if name not in data:
                raise ShapeError(f"Snapshot {path} lacks parameter {name}")
            params[name][...] = data[name]
    return net
