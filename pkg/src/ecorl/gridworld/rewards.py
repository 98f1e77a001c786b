from __future__ import annotations

from enum import Enum
from typing import Iterable, NamedTuple

from .objects import ObjectKind, RewardMode

SPARSE_REWARD = 100.0
INTERACTION_BONUS = 1.0
DISTANCE_SCALE = 0.01
DROP_PENALTY = -100.0
PREDATOR_PENALTY = -10.0


class EventType(str, Enum):
    PICKED = "PickedResource"
    DROPPED = "DroppedResource"
    COMBINED = "Combined"
    CAUGHT = "CaughtByPredator"


class Event(NamedTuple):
    type: EventType
    kind: ObjectKind | None = None

    def __str__(self) -> str:
        if self.kind is None:
            return self.type.value
        return f"{self.type.value}({self.kind.label})"


def compute_reward(
    events: Iterable[Event],
    task_completed: bool,
    dist_to_next_subgoal: int,
    mode: RewardMode,
    one_time_flags: frozenset | set = frozenset(),
    predator_penalty: float = PREDATOR_PENALTY,
) -> float:
    """Reward for one step under the given shaping mode.

    ``one_time_flags`` holds the resource kinds already rewarded in OneTime
    mode; it is read, not updated (the engine owns that bookkeeping).
    """
    events = list(events)
    reward = SPARSE_REWARD if task_completed else 0.0
    picked = [e.kind for e in events if e.type is EventType.PICKED]
    if mode is RewardMode.SUBGOAL:
        reward += INTERACTION_BONUS * len(picked)
    elif mode is RewardMode.DISTANCE:
        reward += -DISTANCE_SCALE * dist_to_next_subgoal + INTERACTION_BONUS * len(picked)
    elif mode is RewardMode.ONE_TIME:
        reward += INTERACTION_BONUS * len(set(picked) - set(one_time_flags))
        reward += DROP_PENALTY * sum(e.type is EventType.DROPPED for e in events)
    reward += predator_penalty * sum(e.type is EventType.CAUGHT for e in events)
    return reward
