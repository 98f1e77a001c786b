"""Random network distillation bonus."""

from __future__ import annotations

import numpy as np

from .network import QNetwork
from .optim import Adam

RND_OUT = 32


class RNDPair:
    """A frozen random target network and a trainable predictor of the same shape."""

    def __init__(self, target: QNetwork, predictor: QNetwork, bonus_scale: float = 0.1, learning_rate: float = 3e-4):
        if bonus_scale < 0:
            raise ValueError("bonus_scale must be >= 0")
        self.target = target
        self.predictor = predictor
        self.bonus_scale = float(bonus_scale)
        self.opt = Adam(predictor.n_params, learning_rate, dtype=predictor.dtype)
        self.target.params.flags.writeable = False

    @classmethod
    def for_channels(cls, n_channels: int, rng: np.random.Generator, bonus_scale=0.1, learning_rate=3e-4, **net_kw):
        target = QNetwork.for_channels(n_channels, RND_OUT, rng=rng, **net_kw)
        predictor = QNetwork.for_channels(n_channels, RND_OUT, rng=rng, **net_kw)
        return cls(target, predictor, bonus_scale, learning_rate)

    def errors(self, obs) -> np.ndarray:
        diff = self.target.forward(obs) - self.predictor.forward(obs)
        return np.mean(diff.astype(np.float64) ** 2, axis=1)

    def bonus(self, obs) -> float:
        return self.bonus_scale * float(self.errors(obs)[0])

    def train_step(self, obs) -> float:
        x = self.predictor._as_batch(obs)
        tgt = self.target.forward(x)
        pred, cache = self.predictor.forward(x, keep_cache=True)
        diff = pred - tgt
        loss = float(np.mean(diff.astype(np.float64) ** 2))
        self.predictor.backward(cache, 2.0 * diff / diff.size)
        self.opt.step(self.predictor.params, self.predictor.grad)
        return loss


def rnd_bonus(pair: RNDPair, obs) -> float:
    return pair.bonus(obs)


def rnd_train_step(pair: RNDPair, batch) -> float:
    return pair.train_step(batch)
