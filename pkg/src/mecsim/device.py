"""Mobile device: a computation queue and a transmission queue, both FIFO.

Waiting times and finalization slots are closed-form in the completion
markers of earlier tasks, so both queues are scheduled at decision time.
A task served one slot at a time occupies whole slots: leftover capacity in
its last slot is not handed to the next task.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .config import SimConfig, exact
from .tasks import Task


def cpu_power(cpu_hz: float) -> float:
    return 1e-27 * cpu_hz**3


def queue_wait(last_finish: int, slot: int) -> int:
    """Slots a new task waits behind everything queued before ``slot``."""
    return max(0, last_finish - slot + 1)


def transmission_slots(size: float, rate: float, slot_seconds: float) -> float:
    if rate <= 0:
        raise ValueError("transmission rate must be positive")
    return size / (rate * slot_seconds)


def local_processing_slots(size: float, density: float, cpu_hz: float, slot_seconds: float) -> float:
    return size / (cpu_hz * slot_seconds / density)


def finish_slot(slot: int, wait: int, duration, deadline: int) -> tuple[int, bool]:
    """Finalization slot of a queued task and whether it is dropped.

    ``deadline`` is the relative deadline in slots, so the task must be done
    by ``slot + deadline - 1``.
    """
    natural = slot + wait + math.ceil(duration) - 1
    cap = slot + deadline - 1
    if natural <= cap:
        return natural, False
    return cap, True


def transmission_energy(tx_slots: float, tx_power: float, slot_seconds: float) -> float:
    return tx_slots * tx_power * slot_seconds


def local_energy(cpu_slots: float, cpu_watts: float, slot_seconds: float) -> float:
    return cpu_slots * cpu_watts * slot_seconds


@dataclass
class QueuePlan:
    """One task's schedule in a device queue, fixed when it is enqueued."""

    task: Task
    target: int | None  # edge index for transmissions, None for local work
    decision_slot: int
    wait: int
    duration: Fraction  # slots of service needed
    finish_slot: int
    dropped: bool
    busy_slots: Fraction  # slots of service actually used (<= duration)
    energy: float

    @property
    def start_slot(self) -> int:
        return self.decision_slot + self.wait


class MobileDevice:
    def __init__(self, index: int, config: SimConfig, battery: float = 0.5):
        self.index = index
        self.config = config
        self.battery = battery
        self.cpu_power = cpu_power(config.device_cpu)
        self.comp_queue: deque[QueuePlan] = deque()
        self.trans_queue: deque[QueuePlan] = deque()
        self.last_comp_finish = 0
        self.last_trans_finish = 0

    def reset(self, battery: float) -> None:
        self.battery = battery
        self.comp_queue.clear()
        self.trans_queue.clear()
        self.last_comp_finish = 0
        self.last_trans_finish = 0

    def wait_computation(self, slot: int) -> int:
        return queue_wait(self.last_comp_finish, slot)

    def wait_transmission(self, slot: int) -> int:
        return queue_wait(self.last_trans_finish, slot)

    def _plan(self, task: Task, slot: int, wait: int, duration: Fraction, power: float,
              target: int | None) -> QueuePlan:
        done, dropped = finish_slot(slot, wait, duration, self.config.deadline)
        if dropped:
            busy = Fraction(max(0, done - (slot + wait) + 1))
        else:
            busy = duration
        energy = float(busy) * power * self.config.slot_seconds
        return QueuePlan(task, target, slot, wait, duration, done, dropped, busy, energy)

    def enqueue_local(self, task: Task, slot: int) -> QueuePlan:
        cfg = self.config
        duration = exact(task.size) * task.density / cfg.device_cycles_per_slot
        plan = self._plan(task, slot, self.wait_computation(slot), duration, self.cpu_power, None)
        self.last_comp_finish = max(self.last_comp_finish, plan.finish_slot)
        self.comp_queue.append(plan)
        return plan

    def enqueue_transmission(self, task: Task, edge: int, slot: int) -> QueuePlan:
        cfg = self.config
        duration = exact(task.size) / cfg.tx_bits_per_slot
        plan = self._plan(task, slot, self.wait_transmission(slot), duration, cfg.tx_power, edge)
        self.last_trans_finish = max(self.last_trans_finish, plan.finish_slot)
        self.trans_queue.append(plan)
        return plan

    @staticmethod
    def _pop_due(queue: deque[QueuePlan], slot: int) -> list[QueuePlan]:
        due = []
        while queue and queue[0].finish_slot <= slot:
            due.append(queue.popleft())
        return due

    def local_due(self, slot: int) -> list[QueuePlan]:
        return self._pop_due(self.comp_queue, slot)

    def transmissions_due(self, slot: int) -> list[QueuePlan]:
        return self._pop_due(self.trans_queue, slot)
