"""Dueling Q-network with an LSTM encoder for the edge-load history.

Scalar observation features go straight to the first dense layer; the
``T_s x J`` history matrix is read row by row by an LSTM whose last hidden
state is concatenated with them. Two ReLU layers feed a state-value head and
an advantage head, recombined as ``Q = V + A - mean(A)``.

Everything is plain numpy with explicit backpropagation. Training runs in
float32 by default; gradient checks build float64 networks.
"""
from __future__ import annotations

import numpy as np

from ..config import SimConfig


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class StateEncoder:
    """Turns flat raw states into network inputs at O(1) scale."""

    def __init__(self, num_edges: int, history_len: int, scalar_scale: np.ndarray, history_scale: float):
        self.num_edges = num_edges
        self.history_len = history_len
        self.scalar_scale = np.asarray(scalar_scale, dtype=float)
        self.history_scale = float(history_scale)

    @classmethod
    def from_config(cls, config: SimConfig) -> "StateEncoder":
        j = config.num_edges
        one_slot_bits = float(config.edge_cycles_per_slot) / min(config.densities)
        scale = np.concatenate([
            [1.0 / max(config.task_sizes), 1.0 / config.deadline, 1.0 / config.deadline],
            np.full(j, 1.0 / one_slot_bits),
            [1.0],
        ])
        return cls(j, config.history_len, scale, 1.0 / config.num_devices)

    @classmethod
    def identity(cls, num_edges: int, history_len: int) -> "StateEncoder":
        return cls(num_edges, history_len, np.ones(num_edges + 4), 1.0)

    @property
    def scalar_width(self) -> int:
        return self.num_edges + 4

    @property
    def state_width(self) -> int:
        return self.scalar_width + self.history_len * self.num_edges

    def __call__(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if states.shape[1] != self.state_width:
            raise ValueError(f"expected states of width {self.state_width}, got {states.shape[1]}")
        k = self.scalar_width
        scalars = states[:, :k] * self.scalar_scale
        history = states[:, k:].reshape(-1, self.history_len, self.num_edges) * self.history_scale
        return scalars, history


PARAM_NAMES = ("lstm_Wx", "lstm_Wh", "lstm_b", "W1", "b1", "W2", "b2", "Wv", "bv", "Wa", "ba")


class QNetwork:
    def __init__(self, encoder: StateEncoder, lstm_hidden: int = 64, widths: tuple[int, int] = (128, 64),
                 rng: np.random.Generator | None = None, params: dict[str, np.ndarray] | None = None,
                 dtype=np.float64):
        self.encoder = encoder
        self.dtype = np.dtype(dtype)
        self.lstm_hidden = lstm_hidden
        self.widths = tuple(widths)
        self.num_actions = encoder.num_edges + 1
        if params is None:
            params = self.init_params(rng if rng is not None else np.random.default_rng())
        self.params = {k: np.asarray(v, dtype=self.dtype) for k, v in params.items()}
        self._check_shapes()

    def shapes(self) -> dict[str, tuple[int, ...]]:
        j, h = self.encoder.num_edges, self.lstm_hidden
        w1, w2 = self.widths
        d_in = self.encoder.scalar_width + h
        return {
            "lstm_Wx": (j, 4 * h), "lstm_Wh": (h, 4 * h), "lstm_b": (4 * h,),
            "W1": (d_in, w1), "b1": (w1,), "W2": (w1, w2), "b2": (w2,),
            "Wv": (w2, 1), "bv": (1,), "Wa": (w2, self.num_actions), "ba": (self.num_actions,),
        }

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        s = self.shapes()
        h = self.lstm_hidden
        bound = 1.0 / np.sqrt(h)
        p = {
            "lstm_Wx": rng.uniform(-bound, bound, s["lstm_Wx"]),
            "lstm_Wh": rng.uniform(-bound, bound, s["lstm_Wh"]),
            "lstm_b": np.zeros(4 * h),
        }
        p["lstm_b"][h:2 * h] = 1.0  # forget gate starts open
        for w, b in (("W1", "b1"), ("W2", "b2")):
            fan_in = s[w][0]
            p[w] = rng.normal(0.0, np.sqrt(2.0 / fan_in), s[w])
            p[b] = np.zeros(s[b])
        for w, b in (("Wv", "bv"), ("Wa", "ba")):
            fan_in, fan_out = s[w]
            p[w] = rng.normal(0.0, np.sqrt(1.0 / (fan_in + fan_out)), s[w])
            p[b] = np.zeros(s[b])
        return p

    def _check_shapes(self) -> None:
        for name, shape in self.shapes().items():
            if name not in self.params or self.params[name].shape != shape:
                got = None if name not in self.params else self.params[name].shape
                raise ValueError(f"parameter {name}: expected shape {shape}, got {got}")

    def copy(self) -> "QNetwork":
        return QNetwork(self.encoder, self.lstm_hidden, self.widths,
                        params={k: v.copy() for k, v in self.params.items()}, dtype=self.dtype)

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        for k in PARAM_NAMES:
            np.copyto(self.params[k], params[k])

    def forward(self, scalars: np.ndarray, history: np.ndarray, keep_cache: bool = False):
        """Return ``(q, value, advantage[, cache])`` for encoded inputs."""
        p = self.params
        scalars = np.asarray(scalars, dtype=self.dtype)
        history = np.asarray(history, dtype=self.dtype)
        n, steps, j = history.shape
        h_dim = self.lstm_hidden
        h = np.zeros((n, h_dim), dtype=self.dtype)
        c = np.zeros((n, h_dim), dtype=self.dtype)
        xs_proj = (history.reshape(n * steps, j) @ p["lstm_Wx"] + p["lstm_b"]).reshape(n, steps, -1)
        seq = []
        for t in range(steps):
            z = xs_proj[:, t] + h @ p["lstm_Wh"]
            gates = sigmoid(z[:, :3 * h_dim])
            i, f, o = gates[:, :h_dim], gates[:, h_dim:2 * h_dim], gates[:, 2 * h_dim:]
            g = np.tanh(z[:, 3 * h_dim:])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            if keep_cache:
                seq.append((h_prev, c_prev, i, f, o, g, tc))
        x1 = np.concatenate([scalars, h], axis=1)
        z1 = x1 @ p["W1"] + p["b1"]
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ p["W2"] + p["b2"]
        a2 = np.maximum(z2, 0.0)
        value = a2 @ p["Wv"] + p["bv"]
        adv = a2 @ p["Wa"] + p["ba"]
        q = value + (adv - adv.mean(axis=1, keepdims=True))
        if not keep_cache:
            return q, value[:, 0], adv
        cache = dict(history=history, seq=seq, x1=x1, z1=z1, a1=a1, z2=z2, a2=a2)
        return q, value[:, 0], adv, cache

    def backward(self, cache: dict, dq: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of ``sum(dq * q)`` with respect to every parameter."""
        p = self.params
        h_dim = self.lstm_hidden
        g: dict[str, np.ndarray] = {}
        dv = dq.sum(axis=1, keepdims=True)
        da = dq - dq.mean(axis=1, keepdims=True)
        a2 = cache["a2"]
        g["Wv"] = a2.T @ dv
        g["bv"] = dv.sum(axis=0)
        g["Wa"] = a2.T @ da
        g["ba"] = da.sum(axis=0)
        dz2 = (dv @ p["Wv"].T + da @ p["Wa"].T) * (cache["z2"] > 0)
        g["W2"] = cache["a1"].T @ dz2
        g["b2"] = dz2.sum(axis=0)
        dz1 = (dz2 @ p["W2"].T) * (cache["z1"] > 0)
        g["W1"] = cache["x1"].T @ dz1
        g["b1"] = dz1.sum(axis=0)
        dh = (dz1 @ p["W1"].T)[:, self.encoder.scalar_width:]

        history = cache["history"]
        dwx = np.zeros_like(p["lstm_Wx"])
        dwh = np.zeros_like(p["lstm_Wh"])
        db = np.zeros_like(p["lstm_b"])
        dc = np.zeros_like(dh)
        for t in reversed(range(len(cache["seq"]))):
            h_prev, c_prev, i, f, o, gg, tc = cache["seq"][t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            dz = np.concatenate([
                dc * gg * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                do * o * (1.0 - o),
                dc * i * (1.0 - gg * gg),
            ], axis=1)
            dwx += history[:, t].T @ dz
            dwh += h_prev.T @ dz
            db += dz.sum(axis=0)
            dh = dz @ p["lstm_Wh"].T
            dc = dc * f
        g["lstm_Wx"], g["lstm_Wh"], g["lstm_b"] = dwx, dwh, db
        return g

    def q_values(self, states: np.ndarray) -> np.ndarray:
        scalars, history = self.encoder(states)
        return self.forward(scalars, history)[0]

    def state_value(self, states: np.ndarray) -> np.ndarray:
        scalars, history = self.encoder(states)
        return self.forward(scalars, history)[1]
