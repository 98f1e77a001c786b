"""Seed splitting.

experiment seed -> per-run SeedSequence([experiment_seed, run_seed]) -> two
child streams: the environment stream (initial worlds, episodic reset seeds)
and the agent stream (network init, exploration, replay sampling).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class RunStreams(NamedTuple):
    env: np.random.Generator
    agent: np.random.Generator


def run_streams(experiment_seed: int, run_seed: int) -> RunStreams:
    env_ss, agent_ss = np.random.SeedSequence([int(experiment_seed), int(run_seed)]).spawn(2)
    return RunStreams(np.random.default_rng(env_ss), np.random.default_rng(agent_ss))


def draw_world_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))
