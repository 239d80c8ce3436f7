"""Action primitives shared by the world, the DAC layers and the embodiments.

Layers propose abstract primitives (GOTO, HEAD, APPROACH, AVOID, EXPLORE,
REGULATE, SET_STANDOFF); each embodiment resolves them into the small set the
world actually integrates (IDLE, STOP, MOVE, LIFT, PLACE, STEP).
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from enum import Enum
from typing import Any


class Kind(str, Enum):
    IDLE = "idle"
    STOP = "stop"
    MOVE = "move"
    LIFT = "lift"
    PLACE = "place"
    STEP = "step"
    # abstract, resolved by the embodiment
    GOTO = "goto"
    HEAD = "head"
    APPROACH = "approach"
    AVOID = "avoid"
    EXPLORE = "explore"
    SEEK = "seek"
    REGULATE = "regulate"
    SET_STANDOFF = "set_standoff"
    HOLD = "hold"


WORLD_KINDS = frozenset({Kind.IDLE, Kind.STOP, Kind.MOVE, Kind.LIFT, Kind.PLACE, Kind.STEP})


@dataclass(frozen=True)
class Action:
    kind: Kind
    v: float = 0.0
    w: float = 0.0
    x: float | None = None
    y: float | None = None
    heading: float | None = None
    ref: str | None = None
    component: int | None = None
    velocity: float | None = None
    pressure: float | None = None
    standoff: float | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind.value}
        for f in fields(self):
            if f.name == "kind":
                continue
            val = getattr(self, f.name)
            if val != f.default:
                out[f.name] = val
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Action":
        data = dict(data)
        kind = Kind(data.pop("kind"))
        return cls(kind=kind, **data)

    def replace(self, **changes: Any) -> "Action":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return Action(**d)


IDLE = Action(Kind.IDLE)
STOP = Action(Kind.STOP)
EXPLORE = Action(Kind.EXPLORE)


def move(v: float, w: float = 0.0) -> Action:
    return Action(Kind.MOVE, v=v, w=w)
