"""Egocentric 5x5 one-hot observation encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objects import ObjectKind, TaskSpec

VIEW = 5
RADIUS = VIEW // 2
OFFSETS = tuple((dx, dy) for dy in range(-RADIUS, RADIUS + 1) for dx in range(-RADIUS, RADIUS + 1))


@dataclass(frozen=True, eq=False)
class Observation:
    grid_view: np.ndarray
    inventory_view: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.grid_view, self.inventory_view])


def observation_size(spec: TaskSpec) -> tuple[int, int]:
    """(grid_view length, inventory_view length)."""
    return VIEW * VIEW * spec.n_channels, spec.n_channels + 1


def _lookup(spec: TaskSpec) -> list[int]:
    table = [-1] * len(ObjectKind)
    for i, kind in enumerate(spec.channels):
        table[kind] = i
    return table


_LOOKUPS: dict = {}


def encode_into(out: np.ndarray, state, spec: TaskSpec) -> np.ndarray:
    """Write the flat observation (grid view then inventory one-hot) into ``out``.

    Window cells are scanned row-major; out-of-bounds cells use the Wall
    channel and Empty has no channel.
    """
    table = _LOOKUPS.get(spec.task)
    if table is None:
        table = _LOOKUPS[spec.task] = _lookup(spec)
    C = spec.n_channels
    wall = table[ObjectKind.WALL]
    out[:] = 0
    ax, ay = state.agent_pos
    W, H = state.width, state.height
    cells = state.cells
    for i, (dx, dy) in enumerate(OFFSETS):
        x, y = ax + dx, ay + dy
        if 0 <= x < W and 0 <= y < H:
            ch = table[cells[y * W + x]]
        else:
            ch = wall
        if ch >= 0:
            out[i * C + ch] = 1
    inv = state.inventory
    out[VIEW * VIEW * C + (C if inv is None else table[inv])] = 1
    return out


def encode_flat(state, spec: TaskSpec, dtype=np.float32) -> np.ndarray:
    g, i = observation_size(spec)
    return encode_into(np.zeros(g + i, dtype=dtype), state, spec)


def encode_observation(state, spec: TaskSpec) -> Observation:
    g, _ = observation_size(spec)
    flat = encode_flat(state, spec)
    return Observation(flat[:g], flat[g:])
