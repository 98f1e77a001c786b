"""Diagnostics that need no learner: hitting times, state entropy, heatmaps."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import replace
from typing import NamedTuple

import numpy as np

from ..gridworld import N_ACTIONS, EnvConfig, encode_flat, reset, step, task_spec


class HittingTime(NamedTuple):
    mean: float
    std: float
    censored: int
    times: tuple


def _uniform_actions(rng: np.random.Generator, chunk: int = 1024):
    while True:
        yield from rng.integers(0, N_ACTIONS, size=chunk).tolist()


def first_reward_time(cfg: EnvConfig, world_seed: int, rng: np.random.Generator, cap: int) -> int | None:
    """1-based index of the first step that completes the task, or None if censored."""
    state = reset(cfg, seed=world_seed)
    actions = _uniform_actions(rng)
    for t in range(1, cap + 1):
        state, out = step(state, next(actions), cfg, observe=False)
        if out.task_completed:
            return t
    return None


def hitting_time(env_cfg: EnvConfig, n_runs: int, cap: int = 10_000, seed: int = 0) -> HittingTime:
    """First sparse-reward time of a uniform random policy over one reset-free lifetime per run.

    Censored runs (no reward within ``cap`` steps) are excluded from mean/std.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    cfg = replace(env_cfg, episodic=False)
    times, censored = [], 0
    for child in np.random.SeedSequence(seed).spawn(n_runs):
        rng = np.random.default_rng(child)
        t = first_reward_time(cfg, int(rng.integers(0, 2**31 - 1)), rng, cap)
        if t is None:
            censored += 1
        else:
            times.append(t)
    if times:
        arr = np.asarray(times, dtype=float)
        mean, std = float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    else:
        mean = std = math.nan
    return HittingTime(mean, std, censored, tuple(times))


def welch_z(a, b) -> float:
    """(mean(b) - mean(a)) / standard error of the difference."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    se = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
    return (b.mean() - a.mean()) / se


def empirical_entropy(counts) -> float:
    c = np.fromiter(counts, dtype=float)
    p = c[c > 0] / c.sum()
    return float(-(p * np.log(p)).sum())


def marginal_state_entropy(env_cfg: EnvConfig, policy=None, T: int = 100_000, seed: int = 0) -> float:
    """Entropy (nats) of the empirical distribution of world configurations over one lifetime.

    A configuration is the agent cell, the inventory and every cell's contents.
    ``policy`` maps a flat observation to an action; None means uniform random.
    """
    cfg = replace(env_cfg, episodic=False)
    rng = np.random.default_rng(seed)
    state = reset(cfg, seed=int(rng.integers(0, 2**31 - 1)))
    counts = Counter()
    if policy is None:
        actions = _uniform_actions(rng)
        for _ in range(T):
            state, _ = step(state, next(actions), cfg, observe=False)
            counts[state.configuration_key()] += 1
    else:
        spec = task_spec(cfg.task)
        for _ in range(T):
            state, _ = step(state, policy(encode_flat(state, spec)), cfg, observe=False)
            counts[state.configuration_key()] += 1
    return empirical_entropy(counts.values())


def visitation_heatmap(trajectory, grid_size: int) -> np.ndarray:
    """Occupancy counts (row = y, column = x) of a sequence of agent positions."""
    pos = np.asarray(list(trajectory), dtype=np.int64).reshape(-1, 2)
    if len(pos) and (pos.min() < 0 or pos.max() >= grid_size):
        bad = pos[(pos < 0).any(axis=1) | (pos >= grid_size).any(axis=1)][0]
        raise ValueError(f"position {tuple(bad)} outside a {grid_size}x{grid_size} grid")
    heat = np.zeros((grid_size, grid_size), dtype=np.int64)
    np.add.at(heat, (pos[:, 1], pos[:, 0]), 1)
    return heat
