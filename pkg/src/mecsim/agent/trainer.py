"""Double-DQN targets, the squared-error loss and RMSProp updates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mdp import Experience
from .network import PARAM_NAMES, QNetwork
from .replay import Batch


@dataclass
class TrainerState:
    replace_threshold: int = 1000
    learning_rate: float = 1e-3
    decay: float = 0.99
    eps: float = 1e-8
    grad_clip: float | None = 1.0
    count: int = 0
    mean_square: dict[str, np.ndarray] = field(default_factory=dict)

    def meta(self) -> dict:
        return dict(replace_threshold=self.replace_threshold, learning_rate=self.learning_rate,
                    decay=self.decay, eps=self.eps, grad_clip=self.grad_clip, count=self.count)


def batch_targets(eval_net, target_net, qoes: np.ndarray, next_states: np.ndarray,
                  terminal: np.ndarray, gamma: float) -> np.ndarray:
    """``q + gamma * Q_target(s', argmax_a Q_eval(s', a))``; just ``q`` when terminal."""
    qoes = np.asarray(qoes, dtype=float)
    next_states = np.atleast_2d(next_states)
    best = np.argmax(eval_net.q_values(next_states), axis=1)
    bootstrap = target_net.q_values(next_states)[np.arange(len(best)), best]
    return qoes + gamma * np.where(terminal, 0.0, bootstrap)


def target_q(eval_net, target_net, experience: Experience, gamma: float) -> float:
    return float(batch_targets(eval_net, target_net, [experience.qoe], experience.next_state[None, :],
                               np.array([experience.terminal]), gamma)[0])


def loss_and_grads(net: QNetwork, states: np.ndarray, actions: np.ndarray,
                   targets: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    scalars, history = net.encoder(states)
    q, _, _, cache = net.forward(scalars, history, keep_cache=True)
    n = len(actions)
    rows = np.arange(n)
    err = q[rows, actions] - targets
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / n
    return float(np.mean(err**2)), net.backward(cache, dq)


def rmsprop_update(net: QNetwork, grads: dict[str, np.ndarray], state: TrainerState) -> None:
    if state.grad_clip:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if norm > state.grad_clip:
            grads = {k: g * (state.grad_clip / norm) for k, g in grads.items()}
    for k in PARAM_NAMES:
        ms = state.mean_square.get(k)
        if ms is None:
            ms = state.mean_square[k] = np.zeros_like(net.params[k])
        g = grads[k]
        ms *= state.decay
        ms += (1.0 - state.decay) * g * g
        net.params[k] -= state.learning_rate * g / (np.sqrt(ms) + state.eps)


def train_step(state: TrainerState, eval_net: QNetwork, target_net: QNetwork, batch: Batch,
               gamma: float) -> float:
    """One gradient step on ``batch``; refreshes the target copy on schedule."""
    n = len(batch.actions)
    if n == 0:
        raise ValueError("cannot train on an empty batch")
    # one evaluation-network pass covers both the loss rows and the argmax rows
    scalars, history = eval_net.encoder(np.concatenate([batch.states, batch.next_states]))
    q_all, _, _, cache = eval_net.forward(scalars, history, keep_cache=True)
    best = np.argmax(q_all[n:], axis=1)
    bootstrap = target_net.q_values(batch.next_states)[np.arange(n), best]
    targets = batch.qoes + gamma * np.where(batch.terminal, 0.0, bootstrap)
    rows = np.arange(n)
    err = q_all[rows, batch.actions] - targets
    dq = np.zeros_like(q_all)
    dq[rows, batch.actions] = 2.0 * err / n
    loss = float(np.mean(err**2))
    grads = eval_net.backward(cache, dq)
    rmsprop_update(eval_net, grads, state)
    state.count += 1
    if state.count % state.replace_threshold == 0:
        target_net.load_params(eval_net.params)
    return loss
