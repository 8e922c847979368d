from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..mdp import Experience


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    qoes: np.ndarray
    next_states: np.ndarray
    terminal: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO ring of experiences with uniform sampling."""

    def __init__(self, capacity: int, state_width: int, rng: np.random.Generator):
        self.capacity = capacity
        self.rng = rng
        self.states = np.zeros((capacity, state_width))
        self.next_states = np.zeros((capacity, state_width))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.qoes = np.zeros(capacity)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.cursor = 0

    def __len__(self) -> int:
        return self.size

    def add(self, exp: Experience) -> None:
        k = self.cursor
        self.states[k] = exp.state
        self.next_states[k] = exp.next_state
        self.actions[k] = exp.action
        self.qoes[k] = exp.qoe
        self.terminal[k] = exp.terminal
        self.cursor = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} experiences, need {batch_size}")
        return self.rng.choice(self.size, size=batch_size, replace=False)

    def sample(self, batch_size: int) -> Batch:
        idx = self.sample_indices(batch_size)
        return Batch(self.states[idx], self.actions[idx], self.qoes[idx],
                     self.next_states[idx], self.terminal[idx])

    def state_dict(self) -> dict[str, np.ndarray]:
        return {
            "states": self.states[: self.size].copy(),
            "next_states": self.next_states[: self.size].copy(),
            "actions": self.actions[: self.size].copy(),
            "qoes": self.qoes[: self.size].copy(),
            "terminal": self.terminal[: self.size].copy(),
            "meta": np.array([self.size, self.cursor]),
        }

    def load_state_dict(self, d: dict[str, np.ndarray]) -> None:
        size, cursor = (int(x) for x in d["meta"])
        self.size, self.cursor = size, cursor
        self.states[:size] = d["states"]
        self.next_states[:size] = d["next_states"]
        self.actions[:size] = d["actions"]
        self.qoes[:size] = d["qoes"]
        self.terminal[:size] = d["terminal"]
