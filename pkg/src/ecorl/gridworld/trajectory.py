"""Line-delimited JSON trajectory dumps for inspecting learned behaviour."""

from __future__ import annotations

import json
from typing import IO

from .objects import Action


def trajectory_record(step: int, state, action, outcome) -> dict:
    inv = state.inventory
    return {
        "step": step,
        "agent_pos": list(state.agent_pos),
        "action": Action(action).name.capitalize() if action in iter(Action) else str(action),
        "reward": outcome.reward,
        "events": [str(e) for e in outcome.events],
        "inventory": None if inv is None else inv.label,
    }


class TrajectoryWriter:
    def __init__(self, stream: IO[str]):
        self.stream = stream
        self.n = 0

    def write(self, state, action, outcome) -> None:
        self.stream.write(json.dumps(trajectory_record(self.n, state, action, outcome), sort_keys=True) + "\n")
        self.n += 1


def read_trajectory(stream: IO[str]) -> list[dict]:
    return [json.loads(line) for line in stream if line.strip()]
