from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from .objects import ObjectKind, RewardMode, Task


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ShapingSchedule:
    """Curriculum knobs, all driven by the lifetime step counter.

    Only the fields relevant to the configured task are used: easy deer for
    Hunting, spawn distance for Scavenging/SaladMaking, worker cooperation for
    the Factory tasks.  Schedules are linear in the clock.
    """

    easy_deer_count: int = 4
    spawn_dist_min: int = 2
    spawn_dist_max: int = 14
    ramp_steps: int = 100_000
    coop_prob_initial: float = 0.9
    decay_steps: int = 100_000

    def __post_init__(self):
        if self.easy_deer_count < 0:
            raise ConfigurationError("shaping.easy_deer_count must be >= 0")
        if not 1 <= self.spawn_dist_min <= self.spawn_dist_max:
            raise ConfigurationError("shaping needs 1 <= spawn_dist_min <= spawn_dist_max")
        if not 0.0 <= self.coop_prob_initial <= 1.0:
            raise ConfigurationError("shaping.coop_prob_initial must lie in [0, 1]")
        if self.ramp_steps < 1 or self.decay_steps < 1:
            raise ConfigurationError("shaping ramp_steps/decay_steps must be >= 1")

    def spawn_dist(self, clock: int) -> int:
        frac = min(1.0, clock / self.ramp_steps)
        return self.spawn_dist_min + int((self.spawn_dist_max - self.spawn_dist_min) * frac)

    def coop_prob(self, clock: int) -> float:
        return self.coop_prob_initial * max(0.0, 1.0 - clock / self.decay_steps)


@dataclass(frozen=True)
class EnvConfig:
    task: Task
    grid_size: int = 8
    dynamism_p: float = 0.0
    shaping: ShapingSchedule | None = None
    reward_mode: RewardMode = RewardMode.SPARSE
    episodic: bool = False
    horizon: int = 200
    nonepisodic_respawn: bool = True
    seed: int = 0
    predator_penalty: float = -10.0
    regen_delay: int = 20
    counts: Mapping[ObjectKind, int] | None = field(default=None, compare=True)

    def __post_init__(self):
        try:
            object.__setattr__(self, "task", Task(self.task))
        except ValueError:
            valid = ", ".join(t.value for t in Task)
            raise ConfigurationError(f"unknown task {self.task!r}; valid tasks: {valid}") from None
        try:
            object.__setattr__(self, "reward_mode", RewardMode(self.reward_mode))
        except ValueError:
            valid = ", ".join(m.value for m in RewardMode)
            raise ConfigurationError(f"unknown reward_mode {self.reward_mode!r}; valid: {valid}") from None
        if not 0.0 <= self.dynamism_p <= 1.0:
            raise ConfigurationError(f"dynamism_p must lie in [0, 1], got {self.dynamism_p}")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        if self.grid_size < 1:
            raise ConfigurationError("grid_size must be >= 1")
        if self.regen_delay < 0:
            raise ConfigurationError("regen_delay must be >= 0")
        if self.counts is not None:
            object.__setattr__(self, "counts", {ObjectKind(k): int(v) for k, v in dict(self.counts).items()})

    def evaluation_version(self, **overrides) -> "EnvConfig":
        """The original task: no shaping, no dynamism, episodic."""
        kw = dict(shaping=None, dynamism_p=0.0, episodic=True, reward_mode=RewardMode.SPARSE)
        kw.update(overrides)
        return replace(self, **kw)

    def with_seed(self, seed: int) -> "EnvConfig":
        return replace(self, seed=seed)
