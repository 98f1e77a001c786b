import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecorl.agent import (
    Adam,
    AgentConfig,
    Batch,
    CheckpointError,
    DQNAgent,
    QNetwork,
    RNDPair,
    ReplayBuffer,
    act,
    decode_checkpoint,
    double_dqn_update,
    encode_checkpoint,
    epsilon,
    q_forward,
    rnd_bonus,
    rnd_train_step,
    sync_target,
    td_targets,
)
from ecorl.agent.dqn import dqn_loss_and_grad


def linear_net(w, b):
    """Q(s) = s*w + b with a single scalar feature and no hidden layers."""
    net = QNetwork(1, 0, len(w), (), (), (), dtype=np.float64)
    net.head_layers[0].W[0] = w
    net.head_layers[0].b[:] = b
    return net


def batch_of(obs, action, reward, next_obs, terminal):
    return Batch(
        np.asarray(obs, float), np.asarray(action), np.asarray(reward, float), np.asarray(next_obs, float), np.asarray(terminal, float)
    )


class TestNetwork:
    def test_shapes(self):
        net = QNetwork.for_channels(4, 6)
        assert net.shapes == [(100, 64), (64, 64), (64, 32), (5, 16), (16, 16), (16, 16), (48, 16), (16, 6)]
        n = sum(i * o + o for i, o in net.shapes)
        assert net.n_params == n == QNetwork.for_channels(4, 6).n_params

    def test_zero_params(self):
        net = QNetwork.for_channels(3)
        q = q_forward(net, np.ones(25 * 3 + 4))
        assert q.shape == (6,) and not q.any()

    def test_output_length(self):
        net = QNetwork.for_channels(6, rng=np.random.default_rng(0))
        q = q_forward(net, np.zeros(157))
        assert q.shape == (6,) and np.all(np.isfinite(q))

    def test_dimension_mismatch(self):
        net = QNetwork.for_channels(3)
        with pytest.raises(ValueError):
            q_forward(net, np.zeros(10))

    def test_hand_computed_tiny_net(self):
        # grid: 2 -> 1, inv: 1 -> 1, head: 2 -> 1 -> 2
        net = QNetwork(2, 1, 2, (1,), (1,), (1,), dtype=np.float64)
        g, i, (h1, h2) = net.grid_layers[0], net.inv_layers[0], net.head_layers
        g.W[:, 0] = [1.0, -2.0]
        g.b[:] = 0.5
        i.W[0, 0] = 3.0
        i.b[:] = -1.0
        h1.W[:, 0] = [2.0, -1.0]
        h1.b[:] = 0.25
        h2.W[0] = [1.0, -3.0]
        h2.b[:] = [0.0, 1.0]
        obs = np.array([2.0, 0.5, 1.0])
        # grid: relu(2 - 1 + 0.5) = 1.5; inv: relu(3 - 1) = 2
        # hidden: relu(2*1.5 - 2 + 0.25) = 1.25 -> q = [1.25, -3.75 + 1]
        assert q_forward(net, obs).tolist() == [1.25, -2.75]

    def test_negative_preactivation_is_cut(self):
        net = QNetwork(1, 0, 1, (1,), (), (), dtype=np.float64)
        net.grid_layers[0].W[0, 0] = -1.0
        net.head_layers[0].W[0, 0] = 5.0
        net.head_layers[0].b[:] = 0.5
        assert q_forward(net, np.array([2.0]))[0] == 0.5

    def test_he_uniform_init(self):
        net = QNetwork.for_channels(4, rng=np.random.default_rng(1))
        for layer in net.layers:
            lim = np.sqrt(6.0 / layer.W.shape[0])
            assert np.abs(layer.W).max() <= lim
            assert not layer.b.any()

    def test_batch_matches_single(self):
        rng = np.random.default_rng(3)
        net = QNetwork.for_channels(4, rng=rng, dtype=np.float64)
        X = (rng.random((7, 105)) < 0.2).astype(float)
        Q = q_forward(net, X)
        for k in range(7):
            np.testing.assert_allclose(Q[k], q_forward(net, X[k]), rtol=1e-12)


def finite_difference_check(rng, h=1e-6):
    net = QNetwork(
        int(rng.integers(1, 5)),
        int(rng.integers(1, 5)),
        int(rng.integers(2, 5)),
        grid_widths=tuple(rng.integers(1, 5, size=rng.integers(1, 3))),
        inv_widths=tuple(rng.integers(1, 5, size=rng.integers(1, 3))),
        head_widths=tuple(rng.integers(1, 5, size=rng.integers(0, 2))),
        dtype=np.float64,
        rng=rng,
    )
    net.params += rng.normal(0, 0.1, size=net.n_params)
    n = int(rng.integers(1, 6))
    batch = batch_of(
        rng.normal(size=(n, net.obs_size)),
        rng.integers(0, net.n_out, size=n),
        rng.normal(size=n),
        rng.normal(size=(n, net.obs_size)),
        np.zeros(n),
    )
    y = rng.normal(size=n)
    dqn_loss_and_grad(net, batch, y)
    analytic = net.grad.copy()
    numeric = np.zeros_like(analytic)
    base = net.params.copy()
    for j in range(net.n_params):
        net.params[:] = base
        net.params[j] += h
        lp = dqn_loss_and_grad(net, batch, y)
        net.params[j] -= 2 * h
        lm = dqn_loss_and_grad(net, batch, y)
        numeric[j] = (lp - lm) / (2 * h)
    net.params[:] = base
    return np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(2024)
    errs = [finite_difference_check(rng) for _ in range(100)]
    assert max(errs) < 1e-4


class TestActing:
    def test_schedule(self):
        assert epsilon(0) == 1.0
        assert epsilon(9000) == pytest.approx(0.1)
        assert epsilon(100_000) == 0.1

    @given(st.integers(0, 10**7), st.integers(0, 10**7))
    def test_schedule_bounds(self, a, b):
        lo, hi = sorted((a, b))
        assert 0.1 <= epsilon(hi) <= epsilon(lo) <= 1.0

    def test_tie_break(self):
        net = linear_net([1, 3, 3, 0, 0, 0], 0)
        assert act(net, np.array([1.0]), 0, np.random.default_rng(0), eps=0.0) == 1

    def test_pure_random_at_start(self):
        net = linear_net([0, 0, 9.0], 0)
        rng = np.random.default_rng(0)
        counts = np.bincount([act(net, np.array([1.0]), 0, rng) for _ in range(3000)], minlength=3)
        assert counts.min() > 900


class TestUpdate:
    def test_terminal_target(self):
        net = linear_net([5.0, 7.0], [1.0, 1.0])
        b = batch_of([[1.0]], [0], [2.5], [[3.0]], [1.0])
        assert td_targets(net, net.clone(), b, 0.99).tolist() == [2.5]

    def test_gamma_zero(self):
        net = linear_net([5.0, 7.0], [1.0, 1.0])
        b = batch_of([[1.0], [2.0]], [0, 1], [2.5, -1.0], [[3.0], [4.0]], [0.0, 0.0])
        assert td_targets(net, net.clone(), b, 0.0).tolist() == [2.5, -1.0]

    def test_hand_derived_update(self):
        online = linear_net([1.0, 2.0], [0.0, 0.0])
        target = linear_net([0.5, 3.0], [0.0, 0.0])
        opt = Adam(online.n_params, learning_rate=0.01, dtype=np.float64)
        b = batch_of([[1.0]], [0], [1.0], [[2.0]], [0.0])
        # online picks a=1 at s'=2 (Q=[2,4]); target evaluates it: 2*3 = 6
        # y = 1 + 0.5*6 = 4; Q(s,0) = 1; loss = 9; dL/dq0 = -6
        _, _, loss = double_dqn_update(online, target, opt, b, gamma=0.5)
        assert loss == 9.0
        step = 0.01 * 6 / (6 + 1e-8)
        W, bias = online.head_layers[0].W, online.head_layers[0].b
        assert W[0, 0] == pytest.approx(1.0 + step, rel=1e-14)
        assert bias[0] == pytest.approx(step, rel=1e-14)
        assert W[0, 1] == 2.0 and bias[1] == 0.0

    def test_empty_batch(self):
        net = linear_net([1.0, 2.0], 0)
        with pytest.raises(ValueError):
            double_dqn_update(net, net.clone(), Adam(net.n_params), batch_of(np.zeros((0, 1)), [], [], np.zeros((0, 1)), []), 0.9)

    def test_adam_zero_gradient(self):
        p = np.random.default_rng(0).normal(size=10)
        before = p.copy()
        opt = Adam(10, dtype=np.float64)
        for _ in range(5):
            opt.step(p, np.zeros(10))
        assert np.array_equal(p, before)
        assert opt.t == 5

    def test_sync(self):
        online = QNetwork(1, 0, 1, (), (), (), dtype=np.float64)  # 2 params
        target = online.clone()
        online.params[:] = [1.0, 2.0]
        sync_target(online, target, 999, 1000)
        assert target.params.tolist() == [0.0, 0.0]
        sync_target(online, target, 1000, 1000)
        assert np.array_equal(target.params, online.params)
        x = np.linspace(-3, 3, 7)[:, None]
        assert np.array_equal(q_forward(online, x), q_forward(target, x))

    def test_two_syncs(self):
        online = QNetwork(2, 0, 1, (), (), (), dtype=np.float64)  # 3 params
        target = online.clone()
        snapshot = None
        rng = np.random.default_rng(0)
        for step in range(1, 26):
            online.params[:] = rng.normal(size=3)
            sync_target(online, target, step, every=10)
            if step % 10 == 0:
                snapshot = online.params.copy()
        assert np.array_equal(target.params, snapshot)
        assert not np.array_equal(target.params, online.params)


class TestReplay:
    def test_fifo(self):
        buf = ReplayBuffer(3, capacity=5)
        for k in range(8):
            buf.add([k % 2, 0, 1], k, float(k), [0, 0, 0], 0)
        assert len(buf) == 5
        assert buf.ordered().action.tolist() == [3, 4, 5, 6, 7]

    @given(st.integers(1, 20), st.integers(0, 40))
    @settings(max_examples=50)
    def test_keeps_last_capacity(self, cap, k):
        buf = ReplayBuffer(1, capacity=cap)
        for i in range(cap + k):
            buf.add([1], i, 0.0, [0], 0)
        assert buf.ordered().action.tolist() == list(range(k, cap + k))

    def test_uint8_storage(self):
        buf = ReplayBuffer(4, capacity=2)
        assert buf.obs.dtype == np.uint8

    def test_empty_sample(self):
        with pytest.raises(ValueError):
            ReplayBuffer(2, 4).sample(1, np.random.default_rng(0))


class TestRND:
    def test_identical_predictor(self):
        rng = np.random.default_rng(0)
        target = QNetwork.for_channels(3, 32, rng=rng)
        pair = RNDPair(target, target.clone())
        assert rnd_bonus(pair, np.ones(79)) == 0.0

    def test_nonnegative(self):
        rng = np.random.default_rng(1)
        pair = RNDPair.for_channels(3, rng)
        for _ in range(20):
            assert rnd_bonus(pair, (rng.random(79) < 0.3).astype(np.float32)) >= 0

    def test_target_frozen_and_bonus_shrinks(self):
        rng = np.random.default_rng(2)
        pair = RNDPair.for_channels(4, rng, learning_rate=1e-3)
        frozen = pair.target.params.copy()
        obs = (rng.random(105) < 0.2).astype(np.float32)
        first = rnd_bonus(pair, obs)
        for _ in range(1000):
            rnd_train_step(pair, obs[None, :])
        assert rnd_bonus(pair, obs) <= 0.1 * first
        assert np.array_equal(pair.target.params, frozen)


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        net = QNetwork.for_channels(4, rng=np.random.default_rng(0))
        blob = encode_checkpoint(net, "Hunting", 1234, 4)
        assert blob[:6] == b"ECORL1"
        loaded, header = decode_checkpoint(blob)
        assert header["global_step"] == 1234 and header["task"] == "Hunting" and header["C"] == 4
        assert np.array_equal(loaded.params, net.params)
        assert encode_checkpoint(loaded, "Hunting", 1234, 4) == blob

    def test_bad_magic(self):
        with pytest.raises(CheckpointError, match="offset 0"):
            decode_checkpoint(b"NOTIT1" + bytes(20))

    def test_truncated(self):
        blob = encode_checkpoint(QNetwork.for_channels(3), "Hunting", 0, 3)
        with pytest.raises(CheckpointError, match="offset") as e:
            decode_checkpoint(blob[:-3])
        assert e.value.offset > 10


class TestAgent:
    def test_q_values_stay_finite(self):
        from ecorl.gridworld import EnvConfig, GridEnv, Task, task_spec

        rng = np.random.default_rng(0)
        env = GridEnv(EnvConfig(Task.HUNTING, dynamism_p=0.1))
        agent = DQNAgent(task_spec(Task.HUNTING).n_channels, 6, AgentConfig(batch_size=32), rng)
        obs = env.reset()
        for _ in range(600):
            a = agent.act(obs)
            out = env.step(a)
            nxt = env.observe()
            agent.observe(obs, a, out.reward, nxt, 0.0)
            obs = nxt
        for _ in range(300):
            loss = agent.train_step()
        assert np.isfinite(loss)
        assert np.all(np.isfinite(agent.online.params))
