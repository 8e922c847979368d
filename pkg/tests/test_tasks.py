import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mecsim.config import SimConfig
from mecsim.tasks import TaskFactory, generate_arrival


def test_zero_rate_never_arrives():
    c = SimConfig(arrival_rate=0.0)
    rng = np.random.default_rng(0)
    assert all(generate_arrival(c, 0, 1 + k % 100, rng) is None for k in range(2000))


def test_empirical_arrival_fraction():
    c = SimConfig()
    rng = np.random.default_rng(12345)
    n = 100_000
    hits = sum(generate_arrival(c, 0, 1 + k % 100, rng) is not None for k in range(n))
    assert abs(hits / n - 0.3) < 0.01


def test_slot_outside_episode_rejected():
    c = SimConfig()
    with pytest.raises(ValueError):
        generate_arrival(c, 0, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        generate_arrival(c, 0, 101, np.random.default_rng(0))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), slot=st.integers(1, 100), device=st.integers(0, 49))
def test_task_fields_valid(seed, slot, device):
    c = SimConfig(arrival_rate=500.0)
    task = generate_arrival(c, device, slot, np.random.default_rng(seed), iter(range(10)))
    if task is not None:
        assert task.size in c.task_sizes
        assert task.density in c.densities
        assert task.deadline_slot == slot + c.deadline - 1 >= task.birth_slot
        assert task.device == device


def test_factory_ids_unique():
    c = SimConfig(arrival_rate=500.0)
    f = TaskFactory(c, np.random.default_rng(0))
    ids = [t.id for s in range(1, 101) for d in range(50) if (t := f.generate_arrival(d, s))]
    assert len(ids) == len(set(ids)) and ids == sorted(ids)


def test_arrivals_monotone_in_rate():
    # common random numbers: raising the rate only adds arrivals
    lo, hi = SimConfig(arrival_rate=50.0), SimConfig(arrival_rate=200.0)
    r1, r2 = np.random.default_rng(3), np.random.default_rng(3)
    for k in range(5000):
        a = generate_arrival(lo, 0, 1 + k % 100, r1)
        b = generate_arrival(hi, 0, 1 + k % 100, r2)
        assert a is None or b is not None
