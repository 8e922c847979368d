"""Observation, action coding, per-task QoE and delayed experience bookkeeping.

A task's QoE only becomes known in the slot it is finalized, possibly many
slots after the decision. :class:`DecisionLedger` keeps the decision-time
state and action until then and pairs them with the next observed state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .device import MobileDevice
from .edge import EdgeNode
from .tasks import Task


@dataclass
class StateVector:
    task_size: float  # bits, 0 when nothing arrived
    wait_comp: int
    wait_trans: int
    edge_backlogs: np.ndarray  # (J,) bits at the end of the previous slot
    battery: float
    history: np.ndarray  # (T_s, J) active-queue counts, oldest row first

    def flatten(self) -> np.ndarray:
        head = [self.task_size, self.wait_comp, self.wait_trans]
        return np.concatenate([head, self.edge_backlogs, [self.battery], self.history.ravel()]).astype(float)

    @classmethod
    def from_flat(cls, vec: Sequence[float], num_edges: int, history_len: int) -> "StateVector":
        vec = np.asarray(vec, dtype=float)
        expected = state_width(num_edges, history_len)
        if vec.shape != (expected,):
            raise ValueError(f"flat state must have shape ({expected},), got {vec.shape}")
        j = num_edges
        return cls(
            task_size=float(vec[0]),
            wait_comp=int(vec[1]),
            wait_trans=int(vec[2]),
            edge_backlogs=vec[3:3 + j].copy(),
            battery=float(vec[3 + j]),
            history=vec[4 + j:].reshape(history_len, j).copy(),
        )


def state_width(num_edges: int, history_len: int) -> int:
    return 4 + num_edges + history_len * num_edges


@dataclass(frozen=True)
class Action:
    """Code 0 runs the task locally; code j >= 1 offloads it to edge j - 1."""

    code: int

    @property
    def local(self) -> bool:
        return self.code == 0

    @property
    def edge(self) -> int | None:
        return None if self.code == 0 else self.code - 1

    def targets(self, num_edges: int) -> tuple[int, np.ndarray]:
        """(x, y) form: offload flag and one-hot edge selector."""
        y = np.zeros(num_edges, dtype=int)
        if not self.local:
            y[self.edge] = 1
        return int(not self.local), y

    @staticmethod
    def validate(code: int, num_edges: int) -> "Action":
        if not 0 <= code <= num_edges:
            raise ValueError(f"action code {code} outside 0..{num_edges}")
        return Action(int(code))


def observe_state(device: MobileDevice, edges: Sequence[EdgeNode], slot: int,
                  task: Task | None) -> StateVector:
    """Observation at the start of ``slot``, before any decision in it."""
    hist_len = device.config.history_len
    history = np.zeros((hist_len, len(edges)))
    for j, edge in enumerate(edges):
        loads = list(edge.load_history)
        if loads:
            history[hist_len - len(loads):, j] = loads
    return StateVector(
        task_size=task.size if task is not None else 0.0,
        wait_comp=device.wait_computation(slot),
        wait_trans=device.wait_transmission(slot),
        edge_backlogs=np.array([float(e.backlog_bits[device.index]) for e in edges]),
        battery=device.battery,
        history=history,
    )


def task_delay(outcome: str, birth_slot: int, finish_slot: int) -> int:
    if outcome == "dropped":
        return 0
    return finish_slot - birth_slot + 1


def task_energy(local_energy: float | None = None, offload_parts: Iterable[float] | None = None) -> float:
    """Energy charged to a task: local CPU energy, or the sum of offload parts."""
    if local_energy is not None:
        return local_energy
    return float(sum(offload_parts or ()))


def task_cost(delay: float, energy: float, battery: float, deadline: int, energy_ref: float) -> float:
    """Battery-weighted mix of normalized delay and normalized energy."""
    return battery * (delay / deadline) + (1.0 - battery) * (energy / energy_ref)


def qoe(outcome: str | None, cost: float, energy_norm: float, reward: float) -> float:
    if outcome is None:
        return 0.0
    if outcome == "completed":
        return reward - cost
    if outcome == "dropped":
        return -energy_norm
    raise ValueError(f"unknown outcome {outcome!r}")


def discounted_return(stream: Iterable[float], gamma: float) -> float:
    total, weight = 0.0, 1.0
    for q in stream:
        total += weight * q
        weight *= gamma
    return total


@dataclass(frozen=True)
class QoERecord:
    task_id: int
    device: int
    decision_slot: int
    finalize_slot: int
    outcome: str
    delay: int
    energy: float
    cost: float
    qoe: float
    offloaded: bool


def make_record(task: Task, outcome: str, finalize_slot: int, energy: float, battery: float,
                deadline: int, energy_ref: float, reward: float, offloaded: bool) -> QoERecord:
    delay = task_delay(outcome, task.birth_slot, finalize_slot)
    cost = task_cost(delay, energy, battery, deadline, energy_ref)
    q = qoe(outcome, cost, energy / energy_ref, reward)
    return QoERecord(task.id, task.device, task.birth_slot, finalize_slot, outcome,
                     delay, energy, cost, q, offloaded)


@dataclass
class Experience:
    task_id: int
    device: int
    state: np.ndarray
    action: int
    qoe: float
    next_state: np.ndarray
    terminal: bool = False

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "device": self.device,
            "state": self.state.tolist(),
            "action": self.action,
            "qoe": self.qoe,
            "next_state": self.next_state.tolist(),
            "terminal": self.terminal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Experience":
        return cls(int(d["task_id"]), int(d["device"]), np.asarray(d["state"], dtype=float),
                   int(d["action"]), float(d["qoe"]), np.asarray(d["next_state"], dtype=float),
                   bool(d.get("terminal", False)))


def write_experiences(path: str | Path, experiences: Iterable[Experience]) -> None:
    with open(path, "w") as fh:
        for e in experiences:
            fh.write(json.dumps(e.to_dict()) + "\n")


def read_experiences(path: str | Path) -> list[Experience]:
    with open(path) as fh:
        return [Experience.from_dict(json.loads(line)) for line in fh if line.strip()]


@dataclass
class PendingTask:
    task_id: int
    device: int
    decision_slot: int
    state: np.ndarray
    action: int


@dataclass
class DecisionLedger:
    """Decided-but-unfinished tasks and the finalizations of the current slot."""

    pending: dict[int, PendingTask] = field(default_factory=dict)
    finalized: list[tuple[PendingTask, QoERecord]] = field(default_factory=list)
    emitted: int = 0

    def open(self, task: Task, state: StateVector, action: int) -> None:
        if task.id in self.pending:
            raise ValueError(f"task {task.id} already has a pending decision")
        self.pending[task.id] = PendingTask(task.id, task.device, task.birth_slot, state.flatten(), action)

    def close(self, record: QoERecord) -> None:
        self.finalized.append((self.pending.pop(record.task_id), record))

    def completion_set(self, device: int, slot: int) -> set[int]:
        """Decision slots of this device's tasks finalized in ``slot``."""
        return {p.decision_slot for p, r in self.finalized
                if p.device == device and r.finalize_slot == slot}

    def finalized_devices(self) -> list[int]:
        return sorted({p.device for p, _ in self.finalized})

    def emit(self, next_states: dict[int, np.ndarray], terminal: bool) -> list[Experience]:
        out = [Experience(p.task_id, p.device, p.state, p.action, r.qoe, next_states[p.device], terminal)
               for p, r in self.finalized]
        self.finalized = []
        self.emitted += len(out)
        return out

    def reset(self) -> None:
        self.pending.clear()
        self.finalized = []
