"""The slotted simulation loop tying devices, edge nodes and decisions together.

Order of work inside slot ``t``:

1. arriving tasks are observed and routed by the decision callback;
2. local computations due in ``t`` finish or drop;
3. transmissions due in ``t`` finish (the task reaches its edge node at the
   start of ``t + 1``) or drop;
4. edge nodes serve their queues and drop expired entries;
5. every edge node broadcasts its active-queue count;
6. QoE of tasks finalized in ``t`` is paired with the next observed state.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .config import SimConfig
from .device import MobileDevice, QueuePlan
from .edge import EdgeNode, EdgeQueueEntry, offload_energy
from .mdp import Action, DecisionLedger, Experience, QoERecord, StateVector, make_record, observe_state
from .tasks import Task, TaskFactory


class DecisionPolicy(Protocol):
    def decide(self, device: int, state: StateVector) -> int: ...


Decide = Callable[[int, StateVector], int]


@dataclass
class SlotReport:
    slot: int
    arrivals: int = 0
    completed: int = 0
    dropped: int = 0
    energy: float = 0.0  # joules charged to tasks finalized in this slot
    records: list[QoERecord] = field(default_factory=list)
    experiences: list[Experience] = field(default_factory=list)


@dataclass
class EpisodeTotals:
    arrivals: int = 0
    completed: int = 0
    dropped: int = 0

    def in_system(self) -> int:
        return self.arrivals - self.completed - self.dropped


class World:
    """One simulated system. All randomness comes from ``seed``."""

    def __init__(self, config: SimConfig, seed: int | None = None, check_invariants: bool = True,
                 trace: bool = False):
        self.config = config
        self.seed = config.seed if seed is None else seed
        arrival_ss, battery_ss = np.random.SeedSequence(self.seed).spawn(2)
        self.tasks = TaskFactory(config, np.random.default_rng(arrival_ss))
        self.battery_rng = np.random.default_rng(battery_ss)
        self.devices = [MobileDevice(i, config) for i in range(config.num_devices)]
        self.edges = [EdgeNode(j, config, check_invariants) for j in range(config.num_edges)]
        self.ledger = DecisionLedger()
        self.trace = trace
        self.episode = -1
        self.slot = 0
        self.totals = EpisodeTotals()

    def reset(self) -> None:
        """Start a new episode with empty queues and freshly drawn batteries."""
        cfg = self.config
        self.episode += 1
        self.slot = 1
        levels = np.asarray(cfg.battery_levels)
        for dev in self.devices:
            dev.reset(float(levels[self.battery_rng.integers(len(levels))]))
        for edge in self.edges:
            edge.reset()
        self.ledger.reset()
        self.totals = EpisodeTotals()
        self._handoffs: dict[int, list[tuple[int, QueuePlan]]] = defaultdict(list)
        self._tx_plans: dict[int, QueuePlan] = {}
        self._arrivals = self._draw_arrivals(1)
        self._obs: dict[int, StateVector] = {}
        self.trace_plans: list[QueuePlan] = []
        self.trace_entries: list[EdgeQueueEntry] = []

    def _draw_arrivals(self, slot: int) -> list[Task | None]:
        if slot > self.config.slots_per_episode:
            return [None] * self.config.num_devices
        return [self.tasks.generate_arrival(i, slot) for i in range(self.config.num_devices)]

    @property
    def done(self) -> bool:
        return self.slot > self.config.slots_per_episode

    def observe(self, device: int) -> StateVector:
        """State of ``device`` at the start of the current slot."""
        if device not in self._obs:
            self._obs[device] = observe_state(self.devices[device], self.edges, self.slot,
                                              self._arrivals[device])
        return self._obs[device]

    def pending_arrival(self, device: int) -> Task | None:
        return self._arrivals[device]

    def _finalize(self, report: SlotReport, task: Task, outcome: str, energy: float, offloaded: bool) -> None:
        cfg = self.config
        rec = make_record(task, outcome, report.slot, energy, self.devices[task.device].battery,
                          cfg.deadline, cfg.energy_ref, cfg.reward, offloaded)
        self.ledger.close(rec)
        report.records.append(rec)
        report.energy += energy
        if outcome == "completed":
            report.completed += 1
        else:
            report.dropped += 1

    def advance_slot(self, decide: Decide | DecisionPolicy) -> SlotReport:
        if self.slot == 0:
            raise RuntimeError("call reset() before advance_slot()")
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        if not callable(decide):
            decide = decide.decide
        cfg = self.config
        t = self.slot
        report = SlotReport(t)

        # 1. arrivals and decisions
        for i, task in enumerate(self._arrivals):
            if task is None:
                continue
            state = self.observe(i)
            action = Action.validate(decide(i, state), cfg.num_edges)
            self.ledger.open(task, state, action.code)
            dev = self.devices[i]
            if action.local:
                plan = dev.enqueue_local(task, t)
            else:
                plan = dev.enqueue_transmission(task, action.edge, t)
            if self.trace:
                self.trace_plans.append(plan)
            report.arrivals += 1

        # 2. local computation
        for dev in self.devices:
            for plan in dev.local_due(t):
                self._finalize(report, plan.task, "dropped" if plan.dropped else "completed",
                               plan.energy, offloaded=False)

        # 3. transmission and hand-off
        for dev in self.devices:
            for plan in dev.transmissions_due(t):
                if plan.dropped or plan.finish_slot >= plan.task.deadline_slot:
                    # no slot left to process it at the edge
                    self._finalize(report, plan.task, "dropped", plan.energy, offloaded=True)
                else:
                    self._handoffs[t + 1].append((plan.target, plan))

        # 4. edge processing
        for j, plan in self._handoffs.pop(t, []):
            self.edges[j].enqueue(plan.task, t)
            self._tx_plans[plan.task.id] = plan
        for edge in self.edges:
            for event in edge.step(t):
                plan = self._tx_plans.pop(event.entry.task.id)
                parts = offload_energy(plan.energy, event.entry, cfg.idle_power, cfg.slot_seconds)
                self._finalize(report, plan.task, event.outcome, parts.total, offloaded=True)
                if self.trace:
                    self.trace_entries.append(event.entry)

        # 5. load broadcast
        for edge in self.edges:
            edge.broadcast_load(t)

        # 6. next observations and experiences
        self.slot = t + 1
        self._arrivals = self._draw_arrivals(t + 1)
        self._obs = {}
        next_states = {i: self.observe(i).flatten() for i in self.ledger.finalized_devices()}
        report.experiences = self.ledger.emit(next_states, terminal=(t == cfg.slots_per_episode))

        self.totals.arrivals += report.arrivals
        self.totals.completed += report.completed
        self.totals.dropped += report.dropped
        return report
