"""Grid tasks with environment shaping and dynamism."""

from .config import ConfigurationError, EnvConfig, ShapingSchedule
from .engine import GridEnv, GridState, StepOutcome, dist_to_next_subgoal, entity_tick, is_connected, make_state, reset, step
from .objects import N_ACTIONS, Action, ObjectKind, RewardMode, Task, TaskSpec, task_spec
from .observation import Observation, encode_flat, encode_into, encode_observation, observation_size
from .rewards import Event, EventType, compute_reward
from .trajectory import TrajectoryWriter, read_trajectory

__all__ = [
    "Action",
    "ConfigurationError",
    "EnvConfig",
    "Event",
    "EventType",
    "GridEnv",
    "GridState",
    "N_ACTIONS",
    "ObjectKind",
    "Observation",
    "RewardMode",
    "ShapingSchedule",
    "StepOutcome",
    "Task",
    "TaskSpec",
    "TrajectoryWriter",
    "compute_reward",
    "dist_to_next_subgoal",
    "encode_flat",
    "encode_into",
    "encode_observation",
    "entity_tick",
    "is_connected",
    "make_state",
    "observation_size",
    "read_trajectory",
    "reset",
    "step",
    "task_spec",
]
