from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import QNetwork, q_forward
from .optim import Adam
from .replay import Batch, ReplayBuffer

EPS_START = 1.0
EPS_FLOOR = 0.1
EPS_DECAY = 1e-4
BATCH_SIZE = 256
TARGET_SYNC = 1000


def epsilon(t: int) -> float:
    return max(EPS_FLOOR, EPS_START - EPS_DECAY * t)


def greedy(q: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the lowest tied index
    return int(np.argmax(q))


def act(net: QNetwork, obs, t: int, rng: np.random.Generator, eps: float | None = None) -> int:
    eps = epsilon(t) if eps is None else eps
    if eps > 0 and rng.random() < eps:
        return int(rng.integers(net.n_out))
    return greedy(q_forward(net, obs))


def td_targets(online: QNetwork, target: QNetwork, batch: Batch, gamma: float) -> np.ndarray:
    """r + gamma (1 - terminal) Q_target(s', argmax_a Q_online(s', a))."""
    reward = np.asarray(batch.reward, dtype=online.dtype)
    if gamma == 0:
        return reward.copy()
    next_online = online.forward(batch.next_obs)
    next_target = target.forward(batch.next_obs)
    best = np.argmax(next_online, axis=1)
    boot = next_target[np.arange(len(best)), best]
    return reward + gamma * (1.0 - np.asarray(batch.terminal, dtype=online.dtype)) * boot


def dqn_loss_and_grad(online: QNetwork, batch: Batch, y: np.ndarray):
    """Mean squared TD error on the taken actions; gradient left in ``online.grad``."""
    n = len(batch.action)
    q, cache = online.forward(batch.obs, keep_cache=True)
    rows = np.arange(n)
    err = q[rows, batch.action] - y
    loss = float(np.mean(err.astype(np.float64) ** 2))
    dq = np.zeros_like(q)
    dq[rows, batch.action] = 2.0 * err / n
    online.backward(cache, dq)
    return loss


def double_dqn_update(online: QNetwork, target: QNetwork, opt: Adam, batch: Batch, gamma: float):
    if len(batch.action) == 0:
        raise ValueError("empty batch")
    y = td_targets(online, target, batch, gamma)
    loss = dqn_loss_and_grad(online, batch, y)
    opt.step(online.params, online.grad)
    return online, opt, loss


def sync_target(online: QNetwork, target: QNetwork, gradient_steps_done: int, every: int = TARGET_SYNC) -> QNetwork:
    if gradient_steps_done % every == 0:
        target.copy_from(online)
    return target


@dataclass
class AgentConfig:
    learning_rate: float = 3e-4
    gamma: float = 0.9
    batch_size: int = BATCH_SIZE
    buffer_capacity: int = 500_000
    target_sync: int = TARGET_SYNC
    rnd_enabled: bool = False
    rnd_scale: float = 0.1


class DQNAgent:
    """Online/target networks, optimizer, replay and (optionally) RND, owned by one run."""

    def __init__(self, n_channels: int, n_actions: int, cfg: AgentConfig, rng: np.random.Generator, **net_kw):
        self.cfg = cfg
        self.rng = rng
        self.online = QNetwork.for_channels(n_channels, n_actions, rng=rng, **net_kw)
        self.target = self.online.clone()
        self.opt = Adam(self.online.n_params, cfg.learning_rate, dtype=self.online.dtype)
        self.buffer = ReplayBuffer(self.online.obs_size, cfg.buffer_capacity)
        self.env_steps = 0
        self.grad_steps = 0
        self.rnd = None
        if cfg.rnd_enabled:
            from .rnd import RNDPair

            self.rnd = RNDPair.for_channels(n_channels, rng, bonus_scale=cfg.rnd_scale, learning_rate=cfg.learning_rate)

    @property
    def epsilon(self) -> float:
        return epsilon(self.env_steps)

    def act(self, obs) -> int:
        return act(self.online, obs, self.env_steps, self.rng)

    def observe(self, obs, action, reward, next_obs, terminal) -> float:
        """Store one transition (adding the RND bonus if enabled); returns the stored reward."""
        if self.rnd is not None:
            reward = reward + self.rnd.bonus(next_obs)
        self.buffer.add(obs, action, reward, next_obs, terminal)
        self.env_steps += 1
        return reward

    def train_step(self) -> float:
        batch = self.buffer.sample(self.cfg.batch_size, self.rng)
        _, _, loss = double_dqn_update(self.online, self.target, self.opt, batch, self.cfg.gamma)
        if self.rnd is not None:
            self.rnd.train_step(batch.next_obs)
        self.grad_steps += 1
        sync_target(self.online, self.target, self.grad_steps, self.cfg.target_sync)
        return loss
