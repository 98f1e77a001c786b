from __future__ import annotations

from dataclasses import dataclass

from ..gridworld import ConfigurationError, EnvConfig


def check_eval_env(eval_env: EnvConfig) -> None:
    problems = []
    if eval_env.shaping is not None:
        problems.append("shaping must be none")
    if eval_env.dynamism_p != 0.0:
        problems.append("dynamism_p must be 0")
    if not eval_env.episodic:
        problems.append("episodic must be true")
    if problems:
        raise ConfigurationError("eval_env is not the original task: " + "; ".join(problems))


@dataclass(frozen=True)
class RunConfig:
    """One training method: the training env plus learner and schedule knobs.

    ``eval_env`` defaults to the original version of ``env`` and is always
    checked to be unshaped, static and episodic.
    """

    env: EnvConfig
    eval_env: EnvConfig | None = None
    name: str = "run"
    epochs: int = 40
    steps_per_collect: int = 500
    grad_steps_per_collect: int = 500
    epoch_steps: int = 5000
    n_validation: int = 100
    eval_horizon: int = 100
    seeds: tuple = tuple(range(10))
    rnd_enabled: bool = False
    rnd_scale: float = 0.1
    learning_rate: float = 3e-4
    gamma: float = 0.9
    batch_size: int = 256
    buffer_capacity: int = 500_000
    target_sync: int = 1000
    checkpoint: bool = True

    def __post_init__(self):
        if self.eval_env is None:
            object.__setattr__(self, "eval_env", self.env.evaluation_version())
        if self.eval_env.task is not self.env.task:
            raise ConfigurationError("eval_env must use the same task as env")
        check_eval_env(self.eval_env)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        for name in ("epochs", "steps_per_collect", "epoch_steps", "n_validation", "eval_horizon", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.grad_steps_per_collect < 0:
            raise ConfigurationError("grad_steps_per_collect must be >= 0")
        if self.epoch_steps % self.steps_per_collect:
            raise ConfigurationError("epoch_steps must be a multiple of steps_per_collect")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if not self.seeds:
            raise ConfigurationError("seeds must not be empty")
