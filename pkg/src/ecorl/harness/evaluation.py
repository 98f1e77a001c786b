from __future__ import annotations

import hashlib

import numpy as np

from ..gridworld import EnvConfig, encode_into, observation_size, reset, step, task_spec
from .config import check_eval_env


class ValidationSet:
    """The frozen evaluation worlds: ``reset(eval_env, seed=i)`` for i in 0..n-1."""

    def __init__(self, eval_env: EnvConfig, n: int = 100, horizon: int = 100):
        check_eval_env(eval_env)
        self.env = eval_env
        self.horizon = horizon
        self.spec = task_spec(eval_env.task)
        self.states = [reset(eval_env, seed=i) for i in range(n)]

    def __len__(self):
        return len(self.states)

    def digest(self) -> str:
        h = hashlib.sha256()
        for s in self.states:
            h.update(repr(s.fingerprint()).encode())
        return h.hexdigest()


def rollout_greedy(net, validation: ValidationSet):
    """Greedy rollouts on copies of the validation worlds; returns per-world solved flags."""
    states = [s.copy() for s in validation.states]
    n = len(states)
    solved = np.zeros(n, dtype=bool)
    g, i = observation_size(validation.spec)
    obs = np.zeros((n, g + i), dtype=net.dtype)
    live = list(range(n))
    for _ in range(validation.horizon):
        if not live:
            break
        for row, k in enumerate(live):
            encode_into(obs[row], states[k], validation.spec)
        actions = np.argmax(net.forward(obs[: len(live)]), axis=1)
        still = []
        for k, a in zip(live, actions):
            _, out = step(states[k], int(a), validation.env, observe=False)
            if out.task_completed:
                solved[k] = True
            else:
                still.append(k)
        live = still
    return solved


def evaluate(net, validation: ValidationSet) -> float:
    """Fraction of validation worlds the greedy policy solves within the horizon."""
    return float(np.mean(rollout_greedy(net, validation)))
