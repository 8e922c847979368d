from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..world import World


@dataclass
class EpisodeMetrics:
    episode: int
    arrivals: int = 0
    completed: int = 0
    dropped: int = 0
    in_system: int = 0
    energy: float = 0.0
    delays: list[int] = field(default_factory=list)  # completed tasks only
    qoes: list[float] = field(default_factory=list)  # every finalized task
    experiences: int = 0
    train_steps: int = 0
    losses: list[float] = field(default_factory=list)

    @property
    def avg_delay(self) -> float:
        return float(np.mean(self.delays)) if self.delays else float("nan")

    @property
    def avg_qoe(self) -> float:
        return float(np.mean(self.qoes)) if self.qoes else float("nan")

    def summary(self) -> dict:
        return dict(episode=self.episode, arrivals=self.arrivals, completed=self.completed,
                    dropped=self.dropped, in_system=self.in_system, energy_j=self.energy,
                    avg_delay_slots=self.avg_delay, avg_qoe=self.avg_qoe,
                    experiences=self.experiences, train_steps=self.train_steps)


def run_episode(world: World, policy, mode: str = "train", episode: int | None = None) -> EpisodeMetrics:
    """Play one episode; in train mode every emitted experience is learned from."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    world.reset()
    ep = world.episode if episode is None else episode
    policy.begin_episode(ep, train=(mode == "train"))
    m = EpisodeMetrics(ep)
    while not world.done:
        report = world.advance_slot(policy)
        m.arrivals += report.arrivals
        m.completed += report.completed
        m.dropped += report.dropped
        m.energy += report.energy
        for rec in report.records:
            m.qoes.append(rec.qoe)
            if rec.outcome == "completed":
                m.delays.append(rec.delay)
        for exp in report.experiences:
            m.experiences += 1
            loss = policy.observe(exp)
            if loss is not None:
                m.train_steps += 1
                m.losses.append(loss)
    m.in_system = world.totals.in_system()
    return m
