"""Object kinds, actions, tasks and the per-task registry."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum


class ObjectKind(IntEnum):
    EMPTY = 0
    WALL = 1
    AXE = 2
    DEER_HARD = 3
    DEER_EASY = 4
    FOOD = 5
    PREDATOR = 6
    LETTUCE = 7
    CARROT = 8
    SALAD = 9
    WOOD = 10
    METAL = 11
    WORKER_WOOD = 12
    WORKER_METAL = 13

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.name.split("_"))


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    PICKUP = 4
    DROP = 5


N_ACTIONS = len(Action)

# (dx, dy); y grows downwards
MOVES = {
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
}
NEIGHBOURS = ((0, -1), (0, 1), (-1, 0), (1, 0))


class Task(str, Enum):
    HUNTING = "Hunting"
    SCAVENGING = "Scavenging"
    SALAD_MAKING = "SaladMaking"
    FACTORY = "Factory"
    FACTORY_WALLS = "FactoryWalls"


class RewardMode(str, Enum):
    SPARSE = "Sparse"
    SUBGOAL = "Subgoal"
    DISTANCE = "Distance"
    ONE_TIME = "OneTime"


K = ObjectKind

PICKABLE = frozenset({K.AXE, K.LETTUCE, K.CARROT, K.WOOD, K.METAL})
WORKER_RESOURCE = {K.WORKER_WOOD: K.WOOD, K.WORKER_METAL: K.METAL}
DEER = frozenset({K.DEER_HARD, K.DEER_EASY})

# unordered recipe table: (dropped, already on the floor) -> product
RECIPES = {
    frozenset({K.LETTUCE, K.CARROT}): K.SALAD,
    frozenset({K.WOOD, K.METAL}): K.AXE,
}


def combine(a: ObjectKind, b: ObjectKind) -> ObjectKind | None:
    return RECIPES.get(frozenset({a, b}))


@dataclass(frozen=True)
class TaskSpec:
    task: Task
    channels: tuple[ObjectKind, ...]
    base_counts: tuple[tuple[ObjectKind, int], ...]
    product: ObjectKind | None = None

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def channel(self, kind: ObjectKind) -> int:
        return self.channels.index(kind)


_FACTORY_CHANNELS = (K.WALL, K.WOOD, K.METAL, K.AXE, K.WORKER_WOOD, K.WORKER_METAL)
_FACTORY_COUNTS = ((K.WORKER_WOOD, 2), (K.WORKER_METAL, 2))

# channel order is frozen; the observation layout depends on it
TASKS: dict[Task, TaskSpec] = {
    Task.HUNTING: TaskSpec(
        Task.HUNTING,
        (K.WALL, K.AXE, K.DEER_HARD, K.DEER_EASY),
        ((K.AXE, 1), (K.DEER_HARD, 2)),
    ),
    Task.SCAVENGING: TaskSpec(
        Task.SCAVENGING,
        (K.WALL, K.FOOD, K.PREDATOR),
        ((K.FOOD, 1), (K.PREDATOR, 2)),
    ),
    Task.SALAD_MAKING: TaskSpec(
        Task.SALAD_MAKING,
        (K.WALL, K.LETTUCE, K.CARROT, K.SALAD),
        ((K.LETTUCE, 1), (K.CARROT, 1)),
        product=K.SALAD,
    ),
    Task.FACTORY: TaskSpec(Task.FACTORY, _FACTORY_CHANNELS, _FACTORY_COUNTS, product=K.AXE),
    Task.FACTORY_WALLS: TaskSpec(Task.FACTORY_WALLS, _FACTORY_CHANNELS, _FACTORY_COUNTS, product=K.AXE),
}


def task_spec(task: Task | str) -> TaskSpec:
    return TASKS[Task(task)]
