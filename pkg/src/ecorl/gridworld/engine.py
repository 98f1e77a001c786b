"""Simulation engine for the compositional grid tasks.

The grid is a flat row-major list of ``ObjectKind`` values; the agent is not
stored in it and may share a cell with an object.  ``step`` and
``entity_tick`` mutate the state they are given.  All randomness goes through
``state.rng``, so a (config, seed, action sequence) triple replays exactly.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigurationError, EnvConfig
from .objects import (
    DEER,
    MOVES,
    NEIGHBOURS,
    PICKABLE,
    WORKER_RESOURCE,
    Action,
    ObjectKind,
    Task,
    TaskSpec,
    combine,
    task_spec,
)
from .observation import Observation, encode_flat, encode_into, encode_observation, observation_size
from .rewards import Event, EventType, compute_reward

K = ObjectKind
EMPTY = int(K.EMPTY)
WALL = int(K.WALL)
DEER_HARD = int(K.DEER_HARD)
DEER_EASY = int(K.DEER_EASY)
PREDATOR = int(K.PREDATOR)
WORKERS = (int(K.WORKER_WOOD), int(K.WORKER_METAL))
MOBILE = frozenset({DEER_HARD, DEER_EASY, PREDATOR, *WORKERS})

FLEE_RADIUS = 2
INGREDIENT_CAP = 3
WALL_FRACTION = 0.25
WALL_RETRIES = 100

# consumed objects that come back in a non-episodic lifetime
RESPAWNABLE = {
    Task.HUNTING: frozenset({K.AXE, K.DEER_HARD}),
    Task.SCAVENGING: frozenset({K.FOOD}),
    Task.SALAD_MAKING: frozenset({K.LETTUCE, K.CARROT}),
    Task.FACTORY: frozenset(),
    Task.FACTORY_WALLS: frozenset(),
}
SPAWN_NEAR_AGENT = frozenset({K.FOOD, K.LETTUCE, K.CARROT})


@dataclass(eq=False)
class GridState:
    width: int
    height: int
    cells: list
    aux: list  # worker regeneration countdown (0 = resource available); moves with the worker
    agent_pos: tuple
    rng: random.Random
    inventory: ObjectKind | None = None
    step_count: int = 0
    shaping_clock: int = 0
    one_time_flags: set = field(default_factory=set)
    next_growth: ObjectKind = K.LETTUCE

    def index(self, x: int, y: int) -> int:
        return y * self.width + x

    def at(self, x: int, y: int) -> ObjectKind:
        return K(self.cells[y * self.width + x])

    def positions(self, kind) -> list[tuple[int, int]]:
        W = self.width
        return [(i % W, i // W) for i, k in enumerate(self.cells) if k == kind]

    def count(self, kind) -> int:
        return self.cells.count(int(kind))

    def grid(self) -> np.ndarray:
        return np.asarray(self.cells, dtype=np.int8).reshape(self.height, self.width)

    def copy(self) -> "GridState":
        rng = random.Random()
        rng.setstate(self.rng.getstate())
        return GridState(
            self.width,
            self.height,
            list(self.cells),
            list(self.aux),
            self.agent_pos,
            rng,
            self.inventory,
            self.step_count,
            self.shaping_clock,
            set(self.one_time_flags),
            self.next_growth,
        )

    def configuration_key(self) -> bytes:
        """Hashable snapshot of everything observable: agent, inventory, all cell contents."""
        x, y = self.agent_pos
        inv = 0 if self.inventory is None else int(self.inventory)
        return bytes((x, y, inv)) + bytes(self.cells)

    def fingerprint(self) -> tuple:
        """Complete state including the RNG, for bit-identity checks."""
        return (
            self.width,
            self.height,
            tuple(self.cells),
            tuple(self.aux),
            self.agent_pos,
            self.inventory,
            self.step_count,
            self.shaping_clock,
            frozenset(self.one_time_flags),
            self.next_growth,
            self.rng.getstate(),
        )


@dataclass(frozen=True, eq=False)
class StepOutcome:
    observation: Observation | None
    reward: float
    task_completed: bool
    events: tuple
    dist_to_next_subgoal: int


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


def is_connected(cells: list, width: int, height: int) -> bool:
    """Flood fill: every non-wall cell reachable from every other."""
    open_cells = [i for i, k in enumerate(cells) if k != WALL]
    if not open_cells:
        return False
    seen = {open_cells[0]}
    queue = deque(seen)
    while queue:
        i = queue.popleft()
        x, y = i % width, i // width
        for dx, dy in NEIGHBOURS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < width and 0 <= ny < height:
                j = ny * width + nx
                if j not in seen and cells[j] != WALL:
                    seen.add(j)
                    queue.append(j)
    return len(seen) == len(open_cells)


def _carve_walls(cells: list, n: int, rng: random.Random) -> None:
    cap = int(WALL_FRACTION * n * n)
    target = rng.randint(cap // 2, cap) if cap > 0 else 0
    placed = 0
    while placed < target:
        horizontal = rng.random() < 0.5
        length = rng.randint(2, max(2, n // 2))
        x0, y0 = rng.randrange(n), rng.randrange(n)
        for t in range(length):
            x, y = (x0 + t, y0) if horizontal else (x0, y0 + t)
            if x >= n or y >= n or placed >= target:
                break
            if cells[y * n + x] != WALL:
                cells[y * n + x] = WALL
                placed += 1


def _spawn_radius(state: GridState, kind, config: EnvConfig) -> int | None:
    if config.shaping is None or kind not in SPAWN_NEAR_AGENT:
        return None
    if config.task not in (Task.SCAVENGING, Task.SALAD_MAKING):
        return None
    return config.shaping.spawn_dist(state.shaping_clock)


def _empty_cells(state: GridState, radius: int | None = None, min_dist: int = 1) -> list[int]:
    W = state.width
    ax, ay = state.agent_pos
    out = []
    for i, k in enumerate(state.cells):
        if k != EMPTY:
            continue
        d = abs(i % W - ax) + abs(i // W - ay)
        if d >= min_dist and (radius is None or d <= radius):
            out.append(i)
    return out


def spawn(state: GridState, kind, config: EnvConfig, strict: bool = False) -> int | None:
    """Put ``kind`` on a random empty cell other than the agent's.

    Food and ingredients land within the shaping spawn distance when shaping
    is active (falling back to anywhere if that disc is full).  Returns the
    cell index, or None when the grid is full and ``strict`` is false.
    """
    radius = _spawn_radius(state, kind, config)
    candidates = _empty_cells(state, radius)
    if not candidates and radius is not None:
        candidates = _empty_cells(state)
    if not candidates:
        if strict:
            raise ConfigurationError(f"no free cell left for {K(kind).label}")
        return None
    i = state.rng.choice(candidates)
    state.cells[i] = int(kind)
    state.aux[i] = 0
    return i


def reset(config: EnvConfig, seed: int | None = None, shaping_clock: int = 0) -> GridState:
    """Fresh world for ``config``; a deterministic function of the seed.

    ``seed`` overrides ``config.seed`` (episodic training draws a new seed per
    episode) and ``shaping_clock`` carries the lifetime step count so the
    curriculum keeps advancing across episodes.
    """
    rng = random.Random(config.seed if seed is None else seed)
    n = config.grid_size
    spec = task_spec(config.task)
    attempts = WALL_RETRIES if config.task is Task.FACTORY_WALLS else 1
    for _ in range(attempts):
        cells = [EMPTY] * (n * n)
        if config.task is Task.FACTORY_WALLS:
            _carve_walls(cells, n, rng)
        if is_connected(cells, n, n):
            break
    else:
        raise ConfigurationError(f"no connected wall layout after {WALL_RETRIES} attempts")

    free = [i for i, k in enumerate(cells) if k == EMPTY]
    agent = rng.choice(free)
    state = GridState(n, n, cells, [0] * (n * n), (agent % n, agent // n), rng, shaping_clock=shaping_clock)

    counts = dict(spec.base_counts)
    if config.counts:
        counts.update(config.counts)
    if config.shaping is not None and config.task is Task.HUNTING:
        counts[K.DEER_EASY] = config.shaping.easy_deer_count
    for kind, number in counts.items():
        for _ in range(number):
            spawn(state, kind, config, strict=True)
    return state


def make_state(
    size: int,
    agent_pos: tuple[int, int],
    objects: dict | None = None,
    inventory: ObjectKind | None = None,
    seed: int = 0,
    shaping_clock: int = 0,
) -> GridState:
    """Hand-built state: ``objects`` maps ``(x, y)`` to an ObjectKind."""
    cells = [EMPTY] * (size * size)
    for (x, y), kind in (objects or {}).items():
        cells[y * size + x] = int(kind)
    ax, ay = agent_pos
    if cells[ay * size + ax] == WALL:
        raise ConfigurationError("agent cannot stand on a wall")
    return GridState(
        size, size, cells, [0] * (size * size), tuple(agent_pos), random.Random(seed),
        inventory=inventory, shaping_clock=shaping_clock,
    )


def _in_bounds(state: GridState, x: int, y: int) -> bool:
    return 0 <= x < state.width and 0 <= y < state.height


def _random_neighbour(state: GridState, x: int, y: int, allow_agent: bool) -> int | None:
    W, cells = state.width, state.cells
    agent = state.index(*state.agent_pos)
    options = []
    for dx, dy in NEIGHBOURS:
        nx, ny = x + dx, y + dy
        if 0 <= nx < W and 0 <= ny < state.height:
            j = ny * W + nx
            if cells[j] == EMPTY and (allow_agent or j != agent):
                options.append(j)
    if not options:
        return None
    return state.rng.choice(options)


def _step_towards(state: GridState, x: int, y: int, allow_agent: bool) -> int | None:
    """One move that shortens the Manhattan distance to the agent, x axis first."""
    ax, ay = state.agent_pos
    W = state.width
    agent = ay * W + ax
    for dx, dy in ((_sign(ax - x), 0), (0, _sign(ay - y))):
        if dx == 0 and dy == 0:
            continue
        j = (y + dy) * W + x + dx
        if state.cells[j] == EMPTY and (allow_agent or j != agent):
            return j
    return None


def _flee(state: GridState, x: int, y: int) -> int | None:
    """One move that grows the Chebyshev distance to the agent, x axis first."""
    ax, ay = state.agent_pos
    W = state.width
    agent = ay * W + ax
    before = max(abs(x - ax), abs(y - ay))
    sx, sy = _sign(x - ax), _sign(y - ay)
    moves = [(d, 0) for d in ((sx,) if sx else (1, -1))] + [(0, d) for d in ((sy,) if sy else (1, -1))]
    for dx, dy in moves:
        nx, ny = x + dx, y + dy
        if not _in_bounds(state, nx, ny):
            continue
        j = ny * W + nx
        if state.cells[j] == EMPTY and j != agent and max(abs(nx - ax), abs(ny - ay)) > before:
            return j
    return None


def _relocate_predator(state: GridState, i: int) -> None:
    state.cells[i] = EMPTY
    candidates = _empty_cells(state, min_dist=3) or _empty_cells(state)
    if candidates:
        state.cells[state.rng.choice(candidates)] = PREDATOR


def _grow_ingredient(state: GridState, config: EnvConfig) -> None:
    def have(kind):
        return state.count(kind) + (state.inventory == kind)

    first = state.next_growth
    other = K.CARROT if first == K.LETTUCE else K.LETTUCE
    state.next_growth = other
    for kind in (first, other):
        if have(kind) < INGREDIENT_CAP:
            spawn(state, kind, config)
            return


def entity_tick(state: GridState, config: EnvConfig) -> list[Event]:
    """Advance every scripted entity by one tick, in row-major scan order.

    Mutates ``state`` and returns the events it caused (predator catches).
    """
    p = config.dynamism_p
    rng = state.rng
    cells, aux, W = state.cells, state.aux, state.width
    ax, ay = state.agent_pos
    agent = ay * W + ax
    coop = 0.0
    if config.shaping is not None and config.task in (Task.FACTORY, Task.FACTORY_WALLS):
        coop = config.shaping.coop_prob(state.shaping_clock)

    events = []
    workers = []
    snapshot = [(i, k) for i, k in enumerate(cells) if k in MOBILE]
    for i, kind in snapshot:
        x, y = i % W, i // W
        target = None
        if kind == DEER_HARD:
            if p > 0 and rng.random() < p:
                target = _random_neighbour(state, x, y, allow_agent=False)
            elif max(abs(x - ax), abs(y - ay)) <= FLEE_RADIUS:
                target = _flee(state, x, y)
        elif kind == DEER_EASY:
            target = _step_towards(state, x, y, allow_agent=False)
        elif kind == PREDATOR:
            if p > 0 and rng.random() < p:
                target = _random_neighbour(state, x, y, allow_agent=True)
            else:
                target = _step_towards(state, x, y, allow_agent=True)
        else:
            if coop > 0 and rng.random() < coop:
                target = _step_towards(state, x, y, allow_agent=False)
            elif p > 0 and rng.random() < p:
                target = _random_neighbour(state, x, y, allow_agent=False)
        if target is not None:
            cells[target], cells[i] = kind, EMPTY
            aux[target], aux[i] = aux[i], 0
            i = target
        if kind == PREDATOR and i == agent:
            events.append(Event(EventType.CAUGHT))
            _relocate_predator(state, i)
        elif kind in WORKERS:
            workers.append(i)

    for i in workers:
        if aux[i] > 0:
            aux[i] -= 1

    if config.task is Task.SALAD_MAKING and p > 0 and rng.random() < p:
        _grow_ingredient(state, config)
    return events


def dist_to_next_subgoal(state: GridState, task: Task) -> int:
    """Manhattan distance to the nearest object the agent should go to next.

    Returns ``width + height`` when no such object exists.
    """
    inv = state.inventory
    if task is Task.HUNTING:
        targets = DEER if inv == K.AXE else {K.AXE}
    elif task is Task.SCAVENGING:
        targets = {K.FOOD}
    elif task is Task.SALAD_MAKING:
        targets = {K.LETTUCE: {K.CARROT}, K.CARROT: {K.LETTUCE}}.get(inv, {K.LETTUCE, K.CARROT})
    else:
        if inv is None:
            targets = {K.WOOD, K.METAL, *WORKER_RESOURCE}
        else:
            partner = K.METAL if inv == K.WOOD else K.WOOD
            worker = K.WORKER_METAL if inv == K.WOOD else K.WORKER_WOOD
            targets = {partner} if state.count(partner) else {worker}
    ax, ay = state.agent_pos
    W = state.width
    best = state.width + state.height
    for i, k in enumerate(state.cells):
        if k in targets:
            d = abs(i % W - ax) + abs(i // W - ay)
            if d < best:
                best = d
    return best


def _agent_phase(state: GridState, action: int, config: EnvConfig, spec: TaskSpec):
    events: list[Event] = []
    consumed: list = []
    completed = False
    cells, W = state.cells, state.width
    x, y = state.agent_pos
    here = y * W + x

    if action in MOVES:
        dx, dy = MOVES[action]
        nx, ny = x + dx, y + dy
        if _in_bounds(state, nx, ny) and cells[ny * W + nx] != WALL:
            state.agent_pos = (nx, ny)
            j = ny * W + nx
            kind = cells[j]
            if kind in DEER and state.inventory == K.AXE:
                cells[j] = EMPTY
                state.inventory = None
                completed = True
                consumed += [K.AXE, K(kind)]
            elif kind == K.FOOD:
                cells[j] = EMPTY
                completed = True
                consumed.append(K.FOOD)
            elif kind == PREDATOR:
                events.append(Event(EventType.CAUGHT))
                _relocate_predator(state, j)

    elif action == Action.PICKUP and state.inventory is None:
        kind = cells[here]
        if kind in PICKABLE:
            cells[here] = EMPTY
            state.inventory = K(kind)
            events.append(Event(EventType.PICKED, K(kind)))
        else:
            for dx, dy in ((0, 0),) + NEIGHBOURS:
                nx, ny = x + dx, y + dy
                if not _in_bounds(state, nx, ny):
                    continue
                j = ny * W + nx
                if cells[j] in WORKERS and state.aux[j] == 0:
                    resource = WORKER_RESOURCE[K(cells[j])]
                    state.inventory = resource
                    state.aux[j] = config.regen_delay
                    events.append(Event(EventType.PICKED, resource))
                    break

    elif action == Action.DROP and state.inventory is not None:
        carried = state.inventory
        kind = cells[here]
        if kind == EMPTY:
            cells[here] = int(carried)
            state.inventory = None
            events.append(Event(EventType.DROPPED, carried))
        else:
            product = combine(carried, K(kind))
            if product is not None:
                state.inventory = None
                events.append(Event(EventType.DROPPED, carried))
                events.append(Event(EventType.COMBINED, product))
                if product == spec.product:
                    cells[here] = EMPTY
                    completed = True
                    consumed += [carried, K(kind)]
                else:
                    cells[here] = int(product)

    return events, completed, consumed


def step(state: GridState, action, config: EnvConfig, observe: bool = True):
    """Advance one time step.  Returns ``(state, StepOutcome)``; ``state`` is mutated.

    Order: agent action, entity ticks, completion, reward, then (non-episodic
    only) respawn of consumed task objects and clock increment.  Unknown
    actions are no-ops for the agent; the world still ticks.
    """
    spec = task_spec(config.task)
    try:
        action = Action(action)
    except ValueError:
        action = None
    if action is None:
        events, completed, consumed = [], False, []
    else:
        events, completed, consumed = _agent_phase(state, action, config, spec)
    events += entity_tick(state, config)

    dist = dist_to_next_subgoal(state, config.task)
    reward = compute_reward(
        events, completed, dist, config.reward_mode, state.one_time_flags, config.predator_penalty
    )
    state.one_time_flags.update(e.kind for e in events if e.type is EventType.PICKED)

    if not config.episodic and config.nonepisodic_respawn:
        respawnable = RESPAWNABLE[config.task]
        for kind in consumed:
            if kind in respawnable:
                spawn(state, kind, config)

    state.step_count += 1
    state.shaping_clock += 1
    obs = encode_observation(state, spec) if observe else None
    return state, StepOutcome(obs, reward, completed, tuple(events), dist)


class GridEnv:
    """Stateful convenience wrapper around :func:`reset` / :func:`step`."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.spec = task_spec(config.task)
        self.state: GridState | None = None
        self.reset_count = 0
        g, i = observation_size(self.spec)
        self.obs_size = g + i

    def reset(self, seed: int | None = None, shaping_clock: int = 0) -> np.ndarray:
        self.state = reset(self.config, seed=seed, shaping_clock=shaping_clock)
        self.reset_count += 1
        return self.observe()

    def observe(self, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            return encode_flat(self.state, self.spec)
        return encode_into(out, self.state, self.spec)

    def step(self, action) -> StepOutcome:
        _, outcome = step(self.state, action, self.config, observe=False)
        return outcome
