"""Training checkpoints: one ``.npz`` of arrays plus a JSON header inside it.

A checkpoint written at an episode boundary holds every learning agent's
evaluation/target parameters, RMSProp accumulators, step counter, replay
memory and RNG state, plus the world's random streams and id counter, so a
resumed run continues bit-for-bit on the same platform.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..config import config_hash
from ..world import World
from .network import PARAM_NAMES
from .policies import QocoPolicy

FORMAT_VERSION = 1


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _set_rng_state(rng: np.random.Generator, state: dict) -> None:
    rng.bit_generator.state = state


def save_checkpoint(path: str | Path, policy: QocoPolicy, world: World | None = None,
                    episode: int | None = None) -> Path:
    """Write ``policy`` (and optionally ``world``) to ``path`` atomically."""
    path = Path(path)
    arrays: dict[str, np.ndarray] = {}
    agents_meta = []
    for k, agent in enumerate(policy.unique_agents()):
        for name in PARAM_NAMES:
            arrays[f"a{k}/eval/{name}"] = agent.eval_net.params[name]
            arrays[f"a{k}/target/{name}"] = agent.target_net.params[name]
            if name in agent.trainer.mean_square:
                arrays[f"a{k}/ms/{name}"] = agent.trainer.mean_square[name]
        for key, value in agent.buffer.state_dict().items():
            arrays[f"a{k}/replay/{key}"] = value
        agents_meta.append(dict(trainer=agent.trainer.meta(), rng=_rng_state(agent.rng)))
    header = dict(
        version=FORMAT_VERSION,
        config_hash=config_hash(policy.sim, policy.cfg),
        shared_network=policy.cfg.shared_network,
        dtype=policy.cfg.dtype,
        episode=episode,
        epsilon=policy.epsilon,
        agents=agents_meta,
    )
    if world is not None:
        header["world"] = dict(seed=world.seed, episode=world.episode, next_id=world.tasks.next_id,
                               arrival_rng=_rng_state(world.tasks.rng),
                               battery_rng=_rng_state(world.battery_rng))
    arrays["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npz")
    with os.fdopen(fd, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)
    return path


def read_header(path: str | Path) -> dict:
    with np.load(path) as data:
        return json.loads(bytes(data["header"]).decode())


def load_checkpoint(path: str | Path, policy: QocoPolicy, world: World | None = None) -> dict:
    """Restore state saved by :func:`save_checkpoint` into existing objects."""
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        expected = config_hash(policy.sim, policy.cfg)
        if header["config_hash"] != expected:
            raise ValueError(f"{path}: checkpoint config {header['config_hash']} != {expected}")
        agents = policy.unique_agents()
        if len(agents) != len(header["agents"]):
            raise ValueError(f"{path}: checkpoint holds {len(header['agents'])} agents, "
                             f"policy has {len(agents)}")
        for k, (agent, meta) in enumerate(zip(agents, header["agents"])):
            agent.eval_net.load_params({n: data[f"a{k}/eval/{n}"] for n in PARAM_NAMES})
            agent.target_net.load_params({n: data[f"a{k}/target/{n}"] for n in PARAM_NAMES})
            agent.trainer.mean_square = {n: data[f"a{k}/ms/{n}"].copy() for n in PARAM_NAMES
                                         if f"a{k}/ms/{n}" in data}
            agent.trainer.count = int(meta["trainer"]["count"])
            agent.buffer.load_state_dict({key: data[f"a{k}/replay/{key}"] for key in
                                          ("states", "next_states", "actions", "qoes", "terminal", "meta")})
            _set_rng_state(agent.rng, meta["rng"])
    policy.epsilon = header["epsilon"]
    if world is not None:
        if "world" not in header:
            raise ValueError(f"{path}: no world state stored")
        w = header["world"]
        if w["seed"] != world.seed:
            raise ValueError(f"{path}: world seed {w['seed']} != {world.seed}")
        world.episode = w["episode"]
        world.tasks.next_id = w["next_id"]
        _set_rng_state(world.tasks.rng, w["arrival_rng"])
        _set_rng_state(world.battery_rng, w["battery_rng"])
    return header
