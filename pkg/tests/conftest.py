import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mecsim.config import SimConfig, desk_profile  # noqa: E402


def small_config(**changes) -> SimConfig:
    base = dict(num_devices=3, num_edges=2, slots_per_episode=20, num_episodes=2, arrival_rate=15.0,
                eval_episodes=2)
    base.update(changes)
    return SimConfig(**base)


class RandomPolicy:
    def __init__(self, num_edges, seed=0, local_prob=None):
        self.rng = np.random.default_rng(seed)
        self.num_edges = num_edges
        self.local_prob = local_prob

    def decide(self, device, state):
        if self.local_prob is not None:
            if self.rng.random() < self.local_prob:
                return 0
            return int(self.rng.integers(1, self.num_edges + 1))
        return int(self.rng.integers(0, self.num_edges + 1))


@pytest.fixture
def desk():
    return desk_profile()


@pytest.fixture
def small():
    return small_config()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
