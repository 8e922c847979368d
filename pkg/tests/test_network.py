import math

import numpy as np
import pytest

from mecsim.agent.network import PARAM_NAMES, QNetwork, StateEncoder
from mecsim.config import desk_profile


def reduced_net(seed=0, j=3, steps=5, dtype=np.float64):
    enc = StateEncoder.identity(j, steps)
    return QNetwork(enc, lstm_hidden=4, widths=(8, 8), rng=np.random.default_rng(seed), dtype=dtype)


def random_states(rng, n, j=3, steps=5):
    return rng.normal(size=(n, 4 + j + steps * j))


def reference_q(params, state, j, steps, hidden):
    """Unvectorized forward pass, one sample, loops over units."""
    p = {k: np.asarray(v, dtype=float) for k, v in params.items()}
    scal = state[:4 + j]
    hist = state[4 + j:].reshape(steps, j)
    h = [0.0] * hidden
    c = [0.0] * hidden
    for t in range(steps):
        z = [sum(hist[t, a] * p["lstm_Wx"][a, u] for a in range(j))
             + sum(h[b] * p["lstm_Wh"][b, u] for b in range(hidden)) + p["lstm_b"][u]
             for u in range(4 * hidden)]
        sig = [1 / (1 + math.exp(-x)) for x in z[:3 * hidden]]
        new_h, new_c = [], []
        for u in range(hidden):
            i, f, o = sig[u], sig[hidden + u], sig[2 * hidden + u]
            g = math.tanh(z[3 * hidden + u])
            new_c.append(f * c[u] + i * g)
            new_h.append(o * math.tanh(new_c[-1]))
        h, c = new_h, new_c
    x = list(scal) + h
    a1 = [max(0.0, sum(x[k] * p["W1"][k, u] for k in range(len(x))) + p["b1"][u]) for u in range(p["W1"].shape[1])]
    a2 = [max(0.0, sum(a1[k] * p["W2"][k, u] for k in range(len(a1))) + p["b2"][u]) for u in range(p["W2"].shape[1])]
    v = sum(a2[k] * p["Wv"][k, 0] for k in range(len(a2))) + p["bv"][0]
    adv = [sum(a2[k] * p["Wa"][k, a] for k in range(len(a2))) + p["ba"][a] for a in range(p["Wa"].shape[1])]
    mean = sum(adv) / len(adv)
    return [v + a - mean for a in adv]


def test_matches_loop_reference():
    rng = np.random.default_rng(1)
    for seed in range(5):
        net = reduced_net(seed)
        for p in net.params.values():
            p += rng.normal(scale=0.3, size=p.shape)  # move away from zero biases
        s = random_states(rng, 1)[0]
        assert np.allclose(net.q_values(s[None])[0], reference_q(net.params, s, 3, 5, 4), atol=1e-12)


def test_dueling_identity_random_params():
    rng = np.random.default_rng(0)
    worst = 0.0
    for k in range(1000):
        net = reduced_net(k) if k % 2 else QNetwork(StateEncoder.identity(3, 5), rng=np.random.default_rng(k))
        s = random_states(rng, 1) * rng.uniform(0.1, 10)
        scal, hist = net.encoder(s)
        q, v, _ = net.forward(scal, hist)
        worst = max(worst, abs(float(np.mean(q[0] - v[0]))))
    assert worst < 1e-6


def test_zero_advantage_head_gives_value():
    net = reduced_net(3)
    net.params["Wa"][:] = 0
    net.params["ba"][:] = 0
    s = random_states(np.random.default_rng(0), 4)
    q = net.q_values(s)
    assert np.allclose(q, net.state_value(s)[:, None])


def test_argmax_invariant_to_advantage_shift():
    net = reduced_net(4)
    s = random_states(np.random.default_rng(2), 32)
    before = np.argmax(net.q_values(s), axis=1)
    net.params["ba"] += 3.7
    assert np.array_equal(before, np.argmax(net.q_values(s), axis=1))


def _loss(net, scal, hist, actions, targets):
    q = net.forward(scal, hist)[0]
    err = q[np.arange(len(actions)), actions] - targets
    return float(np.mean(err**2))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    net = reduced_net(7)
    for p in net.params.values():
        p += rng.normal(scale=0.2, size=p.shape)
    states = random_states(rng, 6)
    scal, hist = net.encoder(states)
    actions = rng.integers(0, 4, size=6)
    targets = rng.normal(size=6)
    q, _, _, cache = net.forward(scal, hist, keep_cache=True)
    err = q[np.arange(6), actions] - targets
    dq = np.zeros_like(q)
    dq[np.arange(6), actions] = 2 * err / 6
    grads = net.backward(cache, dq)
    checked, worst = 0, 0.0
    eps = 1e-6
    for name in PARAM_NAMES:
        flat = net.params[name].reshape(-1)
        picks = rng.choice(flat.size, size=min(flat.size, 16), replace=False)
        for k in picks:
            old = flat[k]
            flat[k] = old + eps
            up = _loss(net, scal, hist, actions, targets)
            flat[k] = old - eps
            down = _loss(net, scal, hist, actions, targets)
            flat[k] = old
            numeric = (up - down) / (2 * eps)
            analytic = grads[name].reshape(-1)[k]
            denom = max(abs(numeric), abs(analytic), 1e-7)
            worst = max(worst, abs(numeric - analytic) / denom)
            checked += 1
    assert checked >= 100
    assert worst < 1e-4


def test_float32_agrees_with_float64():
    net64 = reduced_net(5)
    net32 = QNetwork(net64.encoder, 4, (8, 8), params=net64.params, dtype=np.float32)
    s = random_states(np.random.default_rng(0), 8)
    assert net32.q_values(s).dtype == np.float32
    assert np.allclose(net32.q_values(s), net64.q_values(s), atol=1e-5)


def test_shape_errors():
    net = reduced_net()
    with pytest.raises(ValueError):
        net.q_values(np.zeros((2, 5)))
    bad = {k: v.copy() for k, v in net.params.items()}
    bad["W1"] = np.zeros((3, 3))
    with pytest.raises(ValueError):
        QNetwork(net.encoder, 4, (8, 8), params=bad)


def test_encoder_scales():
    cfg = desk_profile()
    enc = StateEncoder.from_config(cfg)
    s = np.zeros(enc.state_width)
    s[0] = max(cfg.task_sizes)
    s[1] = s[2] = cfg.deadline
    s[3:6] = float(cfg.edge_cycles_per_slot) / min(cfg.densities)
    s[6] = 0.75
    s[7:] = cfg.num_devices
    scal, hist = enc(s)
    assert np.allclose(scal[0, :6], 1.0) and scal[0, 6] == 0.75
    assert hist.shape == (1, cfg.history_len, cfg.num_edges) and np.allclose(hist, 1.0)
