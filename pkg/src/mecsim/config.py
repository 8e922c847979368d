"""Simulation and learning configuration.

Both dataclasses load from one flat YAML mapping; each key belongs to exactly
one of them. Defaults reproduce the full-size setup (50 devices, 5 edge nodes,
1000 episodes of 100 slots); :func:`desk_profile` gives the reduced profile
used by the experiment harness.
"""
from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import yaml


def _mbits(*values: float) -> tuple[float, ...]:
    return tuple(round(v * 1e6) * 1.0 for v in values)


DEFAULT_TASK_SIZES = _mbits(*[1.0 + 0.1 * k for k in range(61)])  # 1.0 .. 7.0 Mbit


@functools.lru_cache(maxsize=4096)
def _exact_float(x: float) -> Fraction:
    return Fraction(repr(x))


def exact(x: float | int | Fraction) -> Fraction:
    """Rational value of a decimal literal (``0.1`` -> ``1/10``)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return _exact_float(float(x))


@dataclass(frozen=True)
class SimConfig:
    num_devices: int = 50
    num_edges: int = 5
    slots_per_episode: int = 100
    num_episodes: int = 1000
    slot_seconds: float = 0.1
    arrival_rate: float = 150.0  # tasks/s, whole system
    task_sizes: tuple[float, ...] = DEFAULT_TASK_SIZES  # bits
    densities: tuple[int, ...] = (197, 297, 397)  # cycles/bit
    deadline: int = 10  # slots
    history_len: int = 5
    battery_levels: tuple[float, ...] = (0.25, 0.5, 0.75)
    device_cpu: float = 2.6e9  # cycles/s
    edge_cpu: float = 42.8e9  # cycles/s
    tx_rate: float = 14e6  # bits/s
    tx_power: float = 2.3  # W
    idle_power: float = 0.1  # W
    edge_power: float = 5.0  # W
    reward: float = 1.0
    discount: float = 0.9
    eval_episodes: int = 50
    seed: int = 0

    def __post_init__(self):
        for name in ("task_sizes", "densities", "battery_levels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        problems = []
        if self.num_devices < 1 or self.num_edges < 1:
            problems.append("num_devices and num_edges must be >= 1")
        if self.slots_per_episode < 1:
            problems.append("slots_per_episode must be >= 1")
        if self.slot_seconds <= 0:
            problems.append("slot_seconds must be > 0")
        if self.deadline < 1:
            problems.append("deadline must be >= 1")
        if self.history_len < 1:
            problems.append("history_len must be >= 1")
        if not self.task_sizes or any(s <= 0 for s in self.task_sizes):
            problems.append("task_sizes must be non-empty and positive")
        if not self.densities or any(d <= 0 for d in self.densities):
            problems.append("densities must be non-empty and positive")
        if not self.battery_levels or any(not 0 < b < 1 for b in self.battery_levels):
            problems.append("battery_levels must lie in (0, 1)")
        if not 0 < self.discount <= 1:
            problems.append("discount must lie in (0, 1]")
        if self.arrival_rate < 0 or self.arrival_probability > 1:
            problems.append("arrival_rate * slot_seconds / num_devices must lie in [0, 1]")
        if min(self.device_cpu, self.edge_cpu, self.tx_rate) <= 0:
            problems.append("device_cpu, edge_cpu and tx_rate must be > 0")
        if problems:
            raise ValueError("invalid SimConfig: " + "; ".join(problems))

    @property
    def arrival_probability(self) -> float:
        """Per-device, per-slot Bernoulli arrival probability."""
        return self.arrival_rate * self.slot_seconds / self.num_devices

    @property
    def device_power(self) -> float:
        """CPU power of a device, 1e-27 * f^3 watts."""
        return 1e-27 * self.device_cpu**3

    @property
    def energy_ref(self) -> float:
        """Energy normalizer: a full deadline of local CPU time."""
        return self.device_power * self.slot_seconds * self.deadline

    @property
    def edge_cycles_per_slot(self) -> Fraction:
        return exact(self.edge_cpu) * exact(self.slot_seconds)

    @functools.cached_property
    def edge_work_scale(self) -> int:
        """Integer multiplier making task cycles and every GPS share integral."""
        scale = self.edge_cycles_per_slot.denominator * math.lcm(*range(1, self.num_devices + 1))
        for size in self.task_sizes:
            scale = math.lcm(scale, exact(size).denominator)
        return scale

    @property
    def device_cycles_per_slot(self) -> Fraction:
        return exact(self.device_cpu) * exact(self.slot_seconds)

    @property
    def tx_bits_per_slot(self) -> Fraction:
        return exact(self.tx_rate) * exact(self.slot_seconds)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class AgentConfig:
    lstm_hidden: int = 64
    dense_widths: tuple[int, int] = (128, 64)
    batch_size: int = 16
    learning_rate: float = 1e-3
    rmsprop_decay: float = 0.99
    rmsprop_eps: float = 1e-8
    grad_clip: float = 1.0
    replay_capacity: int = 10_000
    replace_threshold: int = 1000
    epsilon_start: float = 1.0
    epsilon_final: float = 0.01
    epsilon_decay_fraction: float = 0.8
    eval_epsilon: float = 0.01
    shared_network: bool = False
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "dense_widths", tuple(self.dense_widths))
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")
        if len(self.dense_widths) != 2:
            raise ValueError("dense_widths needs exactly two layer widths")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ValueError("need 1 <= batch_size <= replay_capacity")
        if self.replace_threshold < 1:
            raise ValueError("replace_threshold must be >= 1")

    def epsilon(self, episode: int, num_episodes: int) -> float:
        """Linear decay per episode, held at the floor after the decay window."""
        window = self.epsilon_decay_fraction * num_episodes
        if window <= 0:
            return self.epsilon_final
        frac = min(1.0, episode / window)
        return max(self.epsilon_final, self.epsilon_start + frac * (self.epsilon_final - self.epsilon_start))

    def replace(self, **changes) -> "AgentConfig":
        return dataclasses.replace(self, **changes)


def desk_profile(**changes) -> SimConfig:
    """Reduced profile: 10 devices, 3 edge nodes, 300 training episodes.

    The arrival rate is scaled so each device still sees a task with
    probability 0.3 per slot.
    """
    base = dict(num_devices=10, num_edges=3, num_episodes=300, arrival_rate=30.0)
    base.update(changes)
    return SimConfig(**base)


def full_profile(**changes) -> SimConfig:
    return SimConfig(**changes)


_SIM_KEYS = {f.name for f in fields(SimConfig)}
_AGENT_KEYS = {f.name for f in fields(AgentConfig)}


def split_options(options: dict) -> tuple[dict, dict]:
    unknown = set(options) - _SIM_KEYS - _AGENT_KEYS
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    sim = {k: v for k, v in options.items() if k in _SIM_KEYS}
    agent = {k: v for k, v in options.items() if k in _AGENT_KEYS}
    return sim, agent


def load_config(path: str | Path | None = None, base: SimConfig | None = None,
                **overrides) -> tuple[SimConfig, AgentConfig]:
    """Read a flat YAML mapping on top of ``base`` (desk profile by default)."""
    options: dict = {}
    if path is not None:
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
            raise ValueError(f"{path}: expected a flat key-value mapping")
        options.update(data)
    options.update({k: v for k, v in overrides.items() if v is not None})
    sim_opts, agent_opts = split_options(options)
    sim = (base or desk_profile()).replace(**sim_opts)
    return sim, AgentConfig(**agent_opts)


def dump_config(sim: SimConfig, agent: AgentConfig) -> dict:
    out = {**dataclasses.asdict(sim), **dataclasses.asdict(agent)}
    return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


def config_hash(sim: SimConfig, agent: AgentConfig | None = None) -> str:
    payload = dump_config(sim, agent or AgentConfig())
    payload.pop("seed")
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
