"""Task records and the per-device arrival process."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimConfig


@dataclass(frozen=True)
class Task:
    id: int
    device: int
    birth_slot: int
    size: float  # bits
    density: int  # cycles/bit
    deadline_slot: int  # last slot in which the task may still finish

    @property
    def cycles(self) -> float:
        return self.size * self.density


class TaskFactory:
    """Draws tasks for one world. Ids are unique for the factory's lifetime."""

    def __init__(self, config: SimConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.next_id = 0

    def __next__(self) -> int:
        self.next_id += 1
        return self.next_id - 1

    def generate_arrival(self, device: int, slot: int) -> Task | None:
        return generate_arrival(self.config, device, slot, self.rng, self)


def generate_arrival(config: SimConfig, device: int, slot: int, rng: np.random.Generator,
                     ids=None) -> Task | None:
    """Bernoulli arrival with ``p = rate * tau / I``; size and density uniform.

    Exactly three draws are consumed per call regardless of the outcome, so
    the arrival stream does not depend on earlier outcomes.
    """
    if not 1 <= slot <= config.slots_per_episode:
        raise ValueError(f"slot {slot} outside episode 1..{config.slots_per_episode}")
    u = rng.random()
    k_size = rng.integers(len(config.task_sizes))
    k_density = rng.integers(len(config.densities))
    if u >= config.arrival_probability:
        return None
    task_id = next(ids) if ids is not None else -1
    return Task(
        id=task_id,
        device=device,
        birth_slot=slot,
        size=float(config.task_sizes[k_size]),
        density=int(config.densities[k_density]),
        deadline_slot=slot + config.deadline - 1,
    )
