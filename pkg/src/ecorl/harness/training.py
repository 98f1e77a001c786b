from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..agent import AgentConfig, DQNAgent, QNetwork
from ..gridworld import N_ACTIONS, EventType, encode_into, observation_size, reset, step, task_spec
from ..mdpcore import NumericalError
from .config import RunConfig
from .evaluation import ValidationSet, evaluate
from .seeding import draw_world_seed, run_streams

log = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    env_steps: int
    grad_steps: int
    solve_rate: float
    train_reward_rate: float
    epsilon: float
    loss: float
    completions: int
    drop_events: int
    caught_events: int
    resets: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SeedRun:
    seed: int
    records: list = field(default_factory=list)
    heatmaps: list = field(default_factory=list)  # one grid_size x grid_size count matrix per epoch
    resets: int = 0
    net: QNetwork | None = None  # final online network
    env_steps: int = 0


@dataclass
class RunArtifacts:
    config: RunConfig
    runs: list
    validation_digest: str

    def curve(self):
        """Per-epoch records aggregated over seeds."""
        out = []
        for e in range(self.config.epochs):
            rows = [r.records[e] for r in self.runs]
            rates = np.array([r.solve_rate for r in rows])
            out.append(
                {
                    "epoch": e,
                    "env_steps": rows[0].env_steps,
                    "solve_rate_mean": float(rates.mean()),
                    "solve_rate_std": float(rates.std()),
                    "train_reward_rate": float(np.mean([r.train_reward_rate for r in rows])),
                    "epsilon": rows[0].epsilon,
                    "loss": float(np.mean([r.loss for r in rows])),
                    "drop_events": int(sum(r.drop_events for r in rows)),
                }
            )
        return out

    def final_solve_rates(self) -> list:
        return [r.records[-1].solve_rate for r in self.runs]


class Lifetime:
    """The training world seen by the learner: one unbroken lifetime, or episodes of ``horizon`` steps."""

    def __init__(self, cfg: RunConfig, rng: np.random.Generator):
        self.env = cfg.env
        self.rng = rng
        self.spec = task_spec(cfg.env.task)
        self.resets = 0
        self.episode_len = 0
        self.state = None
        self.reset(shaping_clock=0)

    def reset(self, shaping_clock: int):
        self.state = reset(self.env, seed=draw_world_seed(self.rng), shaping_clock=shaping_clock)
        self.resets += 1
        self.episode_len = 0

    def step(self, action: int):
        """Returns (outcome, terminal).  A terminal step is followed by a reset (episodic only)."""
        _, out = step(self.state, action, self.env, observe=False)
        self.episode_len += 1
        terminal = self.env.episodic and (out.task_completed or self.episode_len >= self.env.horizon)
        return out, terminal


def train_seed(cfg: RunConfig, seed: int, validation: ValidationSet, experiment_seed: int = 0, progress=None) -> SeedRun:
    streams = run_streams(experiment_seed, seed)
    spec = task_spec(cfg.env.task)
    agent_cfg = AgentConfig(
        learning_rate=cfg.learning_rate,
        gamma=cfg.gamma,
        batch_size=cfg.batch_size,
        buffer_capacity=min(cfg.buffer_capacity, cfg.epochs * cfg.epoch_steps),
        target_sync=cfg.target_sync,
        rnd_enabled=cfg.rnd_enabled,
        rnd_scale=cfg.rnd_scale,
    )
    agent = DQNAgent(spec.n_channels, N_ACTIONS, agent_cfg, streams.agent)
    world = Lifetime(cfg, streams.env)
    g, i = observation_size(spec)
    obs = np.zeros(g + i, dtype=np.float32)
    nxt = np.zeros_like(obs)
    encode_into(obs, world.state, spec)

    n = cfg.env.grid_size
    run = SeedRun(seed)
    blocks = cfg.epoch_steps // cfg.steps_per_collect
    for epoch in range(cfg.epochs):
        heat = np.zeros((n, n), dtype=np.int64)
        reward_sum, completions, drops, caught = 0.0, 0, 0, 0
        losses = []
        for _ in range(blocks):
            for _ in range(cfg.steps_per_collect):
                action = agent.act(obs)
                out, terminal = world.step(action)
                encode_into(nxt, world.state, spec)
                agent.observe(obs, action, out.reward, nxt, float(terminal))
                x, y = world.state.agent_pos
                heat[y, x] += 1
                reward_sum += out.reward
                completions += out.task_completed
                for e in out.events:
                    drops += e.type is EventType.DROPPED
                    caught += e.type is EventType.CAUGHT
                if terminal:
                    world.reset(shaping_clock=world.state.shaping_clock)
                    encode_into(nxt, world.state, spec)
                obs, nxt = nxt, obs
            for _ in range(cfg.grad_steps_per_collect):
                losses.append(agent.train_step())
        loss = float(np.mean(losses)) if losses else 0.0
        if not np.isfinite(loss) or not np.all(np.isfinite(agent.online.params)):
            raise NumericalError(f"Q-network diverged in epoch {epoch} (seed {seed})")
        rate = evaluate(agent.online, validation)
        rec = EpochRecord(
            epoch=epoch,
            env_steps=agent.env_steps,
            grad_steps=agent.grad_steps,
            solve_rate=rate,
            train_reward_rate=reward_sum / cfg.epoch_steps,
            epsilon=agent.epsilon,
            loss=loss,
            completions=completions,
            drop_events=drops,
            caught_events=caught,
            resets=world.resets,
        )
        run.records.append(rec)
        run.heatmaps.append(heat)
        log.info("%s seed %d epoch %d solve %.2f loss %.3g", cfg.name, seed, epoch, rate, loss)
        if progress is not None:
            progress(cfg, seed, rec)
    run.resets = world.resets
    run.net = agent.online
    run.env_steps = agent.env_steps
    return run


def run_training(cfg: RunConfig, experiment_seed: int = 0, progress=None, validation: ValidationSet | None = None) -> RunArtifacts:
    """Train every seed of ``cfg`` sequentially and collect the artifacts."""
    if validation is None:
        validation = ValidationSet(cfg.eval_env, cfg.n_validation, cfg.eval_horizon)
    runs = [train_seed(cfg, s, validation, experiment_seed, progress) for s in cfg.seeds]
    return RunArtifacts(cfg, runs, validation.digest())
