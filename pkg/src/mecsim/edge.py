"""Edge node: one FIFO queue per device, capacity split evenly (GPS) among
the queues that are active in a slot.

Service is tracked exactly, as integer CPU cycles scaled by
``SimConfig.edge_work_scale`` so that every equal share is integral; bit
quantities are cycles divided by the task's density. A queue serves only its head entry in
a slot, so the next entry starts in the slot after its predecessor finished
or was dropped.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .config import SimConfig, exact
from .tasks import Task


@dataclass
class EdgeQueueEntry:
    task: Task
    enqueue_slot: int
    remaining_work: int  # cycles times the config's edge_work_scale
    work_scale: int
    start_slot: int | None = None
    finish_slot: int | None = None
    outcome: str | None = None  # "completed" | "dropped"
    edge_energy: float = 0.0
    service_slots: Fraction = Fraction(0)  # fraction-of-slot units of service received

    @property
    def remaining_cycles(self) -> Fraction:
        return Fraction(self.remaining_work, self.work_scale)

    @property
    def remaining_bits(self) -> Fraction:
        return Fraction(self.remaining_work, self.work_scale * self.task.density)


class EdgeEvent(NamedTuple):
    device: int
    entry: EdgeQueueEntry
    outcome: str


class SlotLog(NamedTuple):
    slot: int
    active: frozenset[int]
    served_cycles: dict[int, Fraction]


def edge_processing_slots(size: float, density: float, active_count: int,
                          edge_cpu: float, slot_seconds: float) -> float:
    """Slots of service a task needs at a fixed number of active queues."""
    return size * density * active_count / (edge_cpu * slot_seconds)


class OffloadEnergy(NamedTuple):
    transmission: float
    edge: float
    idle: float

    @property
    def total(self) -> float:
        return self.transmission + self.edge + self.idle


def offload_energy(tx_energy: float, entry: EdgeQueueEntry | None, idle_power: float,
                   slot_seconds: float) -> OffloadEnergy:
    if entry is None:
        return OffloadEnergy(tx_energy, 0.0, 0.0)
    idle = float(entry.service_slots) * idle_power * slot_seconds
    return OffloadEnergy(tx_energy, entry.edge_energy, idle)


class EdgeNode:
    def __init__(self, index: int, config: SimConfig, check_invariants: bool = True):
        self.index = index
        self.config = config
        self.capacity = config.edge_cycles_per_slot  # cycles per slot
        self.work_scale = config.edge_work_scale
        self.scaled_capacity = int(self.capacity * self.work_scale)
        self.power = config.edge_power
        self.check_invariants = check_invariants
        self.load_history: deque[int] = deque(maxlen=config.history_len)
        self.reset()

    def reset(self) -> None:
        n = self.config.num_devices
        self.queues: list[deque[EdgeQueueEntry]] = [deque() for _ in range(n)]
        self.backlog_bits: list[Fraction] = [Fraction(0)] * n  # eta(t-1)
        self.arrival_bits: dict[int, Fraction] = {}  # lambda^E(t), nonzero entries only
        self.dropped_bits: dict[int, Fraction] = {}  # omega(t), nonzero entries only
        self.load_history.clear()
        self.log: list[SlotLog] = []
        self.last_finish: list[int] = [0] * n

    def enqueue(self, task: Task, slot: int) -> EdgeQueueEntry:
        work = exact(task.size) * task.density * self.work_scale
        if work.denominator != 1:
            raise ValueError(f"task size {task.size} not representable in edge work units")
        entry = EdgeQueueEntry(task, slot, int(work), self.work_scale)
        self.queues[task.device].append(entry)
        i = task.device
        self.arrival_bits[i] = self.arrival_bits.get(i, Fraction(0)) + exact(task.size)
        return entry

    def active_queues(self, slot: int) -> set[int]:
        """Devices with a new arrival this slot or backlog left from the last."""
        active = {i for i, b in self.arrival_bits.items() if b > 0}
        active.update(i for i, q in enumerate(self.queues) if q and self.backlog_bits[i] > 0)
        return active

    def _drop(self, device: int, entry: EdgeQueueEntry, slot: int) -> EdgeEvent:
        entry.finish_slot = slot
        entry.outcome = "dropped"
        self.dropped_bits[device] = self.dropped_bits.get(device, Fraction(0)) + entry.remaining_bits
        self.last_finish[device] = max(self.last_finish[device], slot)
        return EdgeEvent(device, entry, "dropped")

    def _drop_expired(self, slot: int, strict: bool, events: list[EdgeEvent]) -> None:
        for i, q in enumerate(self.queues):
            if not q:
                continue
            if any(e.task.deadline_slot < slot or (not strict and e.task.deadline_slot == slot) for e in q):
                keep = deque()
                for e in q:
                    if e.task.deadline_slot < slot or (not strict and e.task.deadline_slot == slot):
                        events.append(self._drop(i, e, slot))
                    else:
                        keep.append(e)
                self.queues[i] = keep

    def step(self, slot: int) -> list[EdgeEvent]:
        """Serve one slot; return entries completed or dropped in it."""
        events: list[EdgeEvent] = []
        touched = {i for i, q in enumerate(self.queues) if q} | set(self.arrival_bits)

        # entries that can no longer meet their deadline never receive service
        self._drop_expired(slot, strict=True, events=events)

        active = frozenset(i for i in self.active_queues(slot) if self.queues[i])
        served: dict[int, int] = {}
        densities: dict[int, int] = {}
        if active:
            share = self.scaled_capacity // len(active)
            slot_energy = self.power * self.config.slot_seconds / len(active)
            for i in sorted(active):
                head = self.queues[i][0]
                if head.start_slot is None:
                    head.start_slot = slot
                used = min(share, head.remaining_work)
                head.remaining_work -= used
                fraction = Fraction(used, share)
                head.service_slots += fraction
                head.edge_energy += float(fraction) * slot_energy
                served[i] = used
                densities[i] = head.task.density
                if head.remaining_work == 0:
                    self.queues[i].popleft()
                    head.finish_slot = slot
                    head.outcome = "completed"
                    self.last_finish[i] = max(self.last_finish[i], slot)
                    events.append(EdgeEvent(i, head, "completed"))

        self._drop_expired(slot, strict=False, events=events)

        new_backlog = {i: sum((e.remaining_bits for e in self.queues[i]), Fraction(0)) for i in touched}
        if self.check_invariants:
            self._check_slot(served, densities, new_backlog)
        for i, b in new_backlog.items():
            self.backlog_bits[i] = b
        self.arrival_bits = {}
        self.dropped_bits = {}
        self.log.append(SlotLog(slot, active, {i: Fraction(w, self.work_scale) for i, w in served.items()}))
        return events

    def _check_slot(self, served: dict[int, int], densities: dict[int, int],
                    new_backlog: dict[int, Fraction]) -> None:
        assert sum(served.values()) <= self.scaled_capacity, "GPS allocation exceeds edge capacity"
        zero = Fraction(0)
        for i, eta in new_backlog.items():
            # served work belongs to the head entry, hence a single density
            served_bits = Fraction(served[i], self.work_scale * densities[i]) if i in served else zero
            expected = (self.backlog_bits[i] + self.arrival_bits.get(i, zero) - served_bits
                        - self.dropped_bits.get(i, zero))
            assert eta == max(zero, expected), f"backlog identity broken for queue {i}"

    def load(self) -> int:
        """Number of active queues in the most recent slot, B_j(t)."""
        return len(self.log[-1].active) if self.log else 0

    def broadcast_load(self, slot: int) -> int:
        b = self.load()
        self.load_history.append(b)
        return b
