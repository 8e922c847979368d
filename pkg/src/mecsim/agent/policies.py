"""Offloading policies: the learned agent and the LC / FO / RD baselines."""
from __future__ import annotations

import numpy as np

from ..config import AgentConfig, SimConfig
from ..mdp import Action, Experience, StateVector, state_width
from .network import QNetwork, StateEncoder
from .replay import ReplayBuffer
from .trainer import TrainerState, train_step

BASELINES = ("LC", "FO", "RD")
LEARNED = "QOCO"
POLICIES = (LEARNED, *BASELINES)


def select_action(net, state: np.ndarray, epsilon: float, rng: np.random.Generator) -> Action:
    """Epsilon-greedy; greedy ties go to the lowest action code."""
    explore = rng.random() < epsilon
    if explore:
        return Action(int(rng.integers(net.num_actions)))
    q = net.q_values(np.asarray(state)[None, :])[0]
    return Action(int(np.argmax(q)))


def baseline_policy(kind: str, num_edges: int, rng: np.random.Generator) -> Action:
    if kind == "LC":
        return Action(0)
    if kind == "FO":
        return Action(int(rng.integers(1, num_edges + 1)))
    if kind == "RD":
        return Action(int(rng.integers(0, num_edges + 1)))
    raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINES}")


class BaselinePolicy:
    learns = False

    def __init__(self, kind: str, config: SimConfig, seed: int = 0):
        if kind not in BASELINES:
            raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINES}")
        self.name = kind
        self.num_edges = config.num_edges
        self.rng = np.random.default_rng(seed)

    def begin_episode(self, episode: int, train: bool) -> None:
        pass

    def decide(self, device: int, state: StateVector) -> int:
        return baseline_policy(self.name, self.num_edges, self.rng).code

    def observe(self, exp: Experience) -> float | None:
        return None


class DeviceAgent:
    """Evaluation/target networks, replay memory and optimizer state of one device."""

    def __init__(self, sim: SimConfig, cfg: AgentConfig, rng: np.random.Generator):
        self.sim = sim
        self.cfg = cfg
        self.rng = rng
        encoder = StateEncoder.from_config(sim)
        self.eval_net = QNetwork(encoder, cfg.lstm_hidden, cfg.dense_widths, rng=rng, dtype=cfg.dtype)
        self.target_net = self.eval_net.copy()
        self.buffer = ReplayBuffer(cfg.replay_capacity, state_width(sim.num_edges, sim.history_len), rng)
        self.trainer = TrainerState(cfg.replace_threshold, cfg.learning_rate, cfg.rmsprop_decay,
                                    cfg.rmsprop_eps, cfg.grad_clip)

    def act(self, state: np.ndarray, epsilon: float) -> int:
        return select_action(self.eval_net, state, epsilon, self.rng).code

    def learn(self, exp: Experience) -> float | None:
        self.buffer.add(exp)
        if len(self.buffer) < self.cfg.batch_size:
            return None
        batch = self.buffer.sample(self.cfg.batch_size)
        return train_step(self.trainer, self.eval_net, self.target_net, batch, self.sim.discount)


class QocoPolicy:
    """One learning agent per device (or a single shared one)."""

    learns = True
    name = LEARNED

    def __init__(self, sim: SimConfig, cfg: AgentConfig | None = None, seed: int = 0):
        self.sim = sim
        self.cfg = cfg or AgentConfig()
        streams = np.random.SeedSequence(seed).spawn(sim.num_devices)
        if self.cfg.shared_network:
            shared = DeviceAgent(sim, self.cfg, np.random.default_rng(streams[0]))
            self.agents = [shared] * sim.num_devices
        else:
            self.agents = [DeviceAgent(sim, self.cfg, np.random.default_rng(s)) for s in streams]
        self.epsilon = self.cfg.epsilon_start
        self.training = True

    def begin_episode(self, episode: int, train: bool) -> None:
        self.training = train
        if train:
            self.epsilon = self.cfg.epsilon(episode, self.sim.num_episodes)
        else:
            self.epsilon = self.cfg.eval_epsilon

    def decide(self, device: int, state: StateVector) -> int:
        # reads the current evaluation parameters of this device's network
        return self.agents[device].act(state.flatten(), self.epsilon)

    def observe(self, exp: Experience) -> float | None:
        if not self.training:
            return None
        return self.agents[exp.device].learn(exp)

    def unique_agents(self) -> list[DeviceAgent]:
        seen, out = set(), []
        for a in self.agents:
            if id(a) not in seen:
                seen.add(id(a))
                out.append(a)
        return out


def make_policy(name: str, sim: SimConfig, cfg: AgentConfig | None = None, seed: int = 0):
    if name == LEARNED:
        return QocoPolicy(sim, cfg, seed)
    return BaselinePolicy(name, sim, seed)
