import numpy as np
import pytest
from scipy import stats

from mecsim.agent.network import PARAM_NAMES, QNetwork, StateEncoder
from mecsim.agent.policies import BaselinePolicy, QocoPolicy, baseline_policy, make_policy, select_action
from mecsim.agent.replay import Batch, ReplayBuffer
from mecsim.agent.runner import run_episode
from mecsim.agent.trainer import TrainerState, batch_targets, target_q, train_step
from mecsim.config import AgentConfig
from mecsim.mdp import Experience
from mecsim.world import World

from conftest import small_config


class TableNet:
    """Fixed Q-values per state, looked up by the first state entry."""

    def __init__(self, table):
        self.table = np.asarray(table, dtype=float)
        self.num_actions = self.table.shape[1]

    def q_values(self, states):
        return self.table[np.atleast_2d(states)[:, 0].astype(int)]


def exp(state, action, q, next_state, terminal=False):
    return Experience(0, 0, np.asarray(state, float), action, q, np.asarray(next_state, float), terminal)


def test_target_hand_built_table():
    eval_net = TableNet([[0.0, 0.0], [1.0, 3.0]])
    target_net = TableNet([[0.0, 0.0], [5.0, 2.0]])
    e = exp([0], 0, 0.5, [1])
    # eval picks action 1 in the next state, target values it at 2
    assert target_q(eval_net, target_net, e, 0.9) == pytest.approx(0.5 + 0.9 * 2.0)
    assert target_q(eval_net, target_net, e, 0.0) == 0.5
    assert target_q(eval_net, target_net, exp([0], 0, 0.5, [1], terminal=True), 0.9) == 0.5
    # identical networks reduce to the max
    assert target_q(target_net, target_net, e, 0.9) == pytest.approx(0.5 + 0.9 * 5.0)


def small_net(seed=0, dtype=np.float64):
    return QNetwork(StateEncoder.identity(2, 3), lstm_hidden=8, widths=(16, 16),
                    rng=np.random.default_rng(seed), dtype=dtype)


def make_batch(rng, n, width=12):
    return Batch(rng.normal(size=(n, width)), rng.integers(0, 3, size=n), rng.normal(size=n),
                 rng.normal(size=(n, width)), np.zeros(n, dtype=bool))


def test_zero_error_batch_changes_nothing():
    rng = np.random.default_rng(0)
    net = small_net()
    target = net.copy()
    b = make_batch(rng, 8)
    q = net.q_values(b.states)[np.arange(8), b.actions]
    b = b._replace(qoes=q)
    before = {k: v.copy() for k, v in net.params.items()}
    loss = train_step(TrainerState(), net, target, b, gamma=0.0)
    assert loss == 0.0
    for k in PARAM_NAMES:
        assert np.array_equal(before[k], net.params[k])


def test_target_refresh_schedule():
    rng = np.random.default_rng(1)
    net = small_net(1)
    target = net.copy()
    state = TrainerState(replace_threshold=5)
    frozen = {k: v.copy() for k, v in target.params.items()}
    for step in range(1, 11):
        train_step(state, net, target, make_batch(rng, 4), gamma=0.9)
        same = all(np.array_equal(target.params[k], net.params[k]) for k in PARAM_NAMES)
        if step % 5 == 0:
            assert same
            frozen = {k: v.copy() for k, v in target.params.items()}
        else:
            assert not same
            assert all(np.array_equal(target.params[k], frozen[k]) for k in PARAM_NAMES)
    assert state.count == 10


def test_empty_batch_rejected():
    net = small_net()
    with pytest.raises(ValueError):
        train_step(TrainerState(), net, net.copy(), make_batch(np.random.default_rng(0), 0), 0.9)


def test_loss_decreases_on_fixed_batch():
    rng = np.random.default_rng(2)
    net = small_net(2)
    b = make_batch(rng, 16)
    targets = batch_targets(net, net, b.qoes, b.next_states, np.ones(16, bool), 0.9)
    assert np.array_equal(targets, b.qoes)
    state = TrainerState(replace_threshold=10**9)
    frozen = net.copy()
    losses = [train_step(state, net, frozen, b._replace(terminal=np.ones(16, bool)), 0.9) for _ in range(200)]
    assert losses[-1] < 0.1 * losses[0]


def test_replay_ring_and_sampling():
    buf = ReplayBuffer(5, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        buf.sample(1)
    for k in range(8):
        buf.add(exp([k, 0], k % 2, float(k), [k, 1]))
    assert len(buf) == 5
    assert sorted(buf.qoes.tolist()) == [3.0, 4.0, 5.0, 6.0, 7.0]
    idx = buf.sample_indices(5)
    assert sorted(idx.tolist()) == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        buf.sample(6)


def test_replay_uniformity_chi_square():
    n = 50
    buf = ReplayBuffer(n, 1, np.random.default_rng(123))
    for k in range(n):
        buf.add(exp([k], 0, 0.0, [k]))
    counts = np.zeros(n)
    for _ in range(4000):
        counts[buf.sample_indices(16)] += 1
    _, p = stats.chisquare(counts)
    assert p > 0.01


def test_replay_state_roundtrip():
    rng = np.random.default_rng(0)
    a = ReplayBuffer(6, 2, rng)
    for k in range(9):
        a.add(exp([k, -k], k % 3, k * 0.5, [k + 1, 0], k == 4))
    b = ReplayBuffer(6, 2, rng)
    b.load_state_dict(a.state_dict())
    for f in ("states", "next_states", "actions", "qoes", "terminal"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert (a.size, a.cursor) == (b.size, b.cursor)


def test_select_action_greedy_and_ties():
    net = TableNet([[0.2, 0.9, 0.9]])
    rng = np.random.default_rng(0)
    assert all(select_action(net, np.zeros(1), 0.0, rng).code == 1 for _ in range(50))


def test_select_action_uniform_exploration():
    net = TableNet([[0.0, 1.0, 0.0, 0.0]])
    rng = np.random.default_rng(0)
    codes = np.array([select_action(net, np.zeros(1), 1.0, rng).code for _ in range(100_000)])
    freq = np.bincount(codes, minlength=4) / codes.size
    assert np.all(np.abs(freq - 0.25) < 0.02)


def test_baselines():
    rng = np.random.default_rng(0)
    assert {baseline_policy("LC", 3, rng).code for _ in range(100)} == {0}
    fo = [baseline_policy("FO", 3, rng).code for _ in range(1000)]
    assert 0 not in fo and set(fo) == {1, 2, 3}
    rd = np.array([baseline_policy("RD", 3, rng).code for _ in range(100_000)])
    assert np.all(np.abs(np.bincount(rd, minlength=4) / rd.size - 0.25) < 0.02)
    with pytest.raises(ValueError):
        baseline_policy("XX", 3, rng)
    with pytest.raises(ValueError):
        BaselinePolicy("QOCO", small_config())


def _two_action_run(seed, steps=2000):
    """q=1 for action 1, q=0 for action 0; states are random noise."""
    rng = np.random.default_rng(seed)
    cfg = AgentConfig()
    net = QNetwork(StateEncoder.identity(1, 2), rng=rng, dtype=np.float32)
    target = net.copy()
    buf = ReplayBuffer(cfg.replay_capacity, 7, rng)
    trainer = TrainerState(cfg.replace_threshold, cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_eps,
                           cfg.grad_clip)
    state = rng.uniform(size=7)
    for step in range(steps):
        eps = max(0.05, 1.0 - step / 1000)
        a = select_action(net, state, eps, rng).code
        nxt = rng.uniform(size=7)
        buf.add(exp(state, a, float(a == 1), nxt))
        if len(buf) >= cfg.batch_size:
            train_step(trainer, net, target, buf.sample(cfg.batch_size), 0.9)
        state = nxt
    probe = rng.uniform(size=(200, 7))
    return np.mean(np.argmax(net.q_values(probe), axis=1) == 1)


def test_two_action_learning_sanity():
    wins = sum(_two_action_run(seed) >= 0.99 for seed in range(10))
    assert wins >= 9


def test_eval_mode_keeps_parameters():
    cfg = small_config(arrival_rate=25.0)
    pol = QocoPolicy(cfg, AgentConfig(lstm_hidden=8, dense_widths=(16, 16)), seed=0)
    w = World(cfg, seed=0)
    run_episode(w, pol, "train", 0)
    before = [{k: v.copy() for k, v in a.eval_net.params.items()} for a in pol.agents]
    m = run_episode(w, pol, "eval", 1)
    assert m.train_steps == 0 and pol.epsilon == 0.01
    for a, b in zip(pol.agents, before):
        assert all(np.array_equal(a.eval_net.params[k], b[k]) for k in PARAM_NAMES)


def test_training_deterministic():
    cfg = small_config(arrival_rate=25.0)

    def losses():
        pol = make_policy("QOCO", cfg, AgentConfig(lstm_hidden=8, dense_widths=(16, 16)), seed=3)
        w = World(cfg, seed=3)
        return [run_episode(w, pol, "train", ep).losses for ep in range(2)]

    first = losses()
    assert sum(map(len, first)) > 0
    assert first == losses()


def test_zero_arrivals_no_training():
    cfg = small_config(arrival_rate=0.0)
    pol = make_policy("QOCO", cfg, AgentConfig(lstm_hidden=8, dense_widths=(16, 16)))
    m = run_episode(World(cfg, seed=0), pol, "train", 0)
    assert (m.experiences, m.train_steps, m.arrivals) == (0, 0, 0)
    with pytest.raises(ValueError):
        run_episode(World(cfg, seed=0), pol, "test")


def test_shared_network_option():
    cfg = small_config()
    pol = QocoPolicy(cfg, AgentConfig(lstm_hidden=8, dense_widths=(16, 16), shared_network=True))
    assert len(pol.unique_agents()) == 1 and len(pol.agents) == cfg.num_devices
