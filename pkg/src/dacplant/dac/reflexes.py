"""Reactive layer: threshold reflexes over named scalar sensor channels."""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping

from ..actions import Action


class Priority(IntEnum):
    SAFETY = 0
    APPETITIVE = 1
    DEFAULT = 2


_CMP = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge, "==": operator.eq}


@dataclass(frozen=True)
class Reflex:
    name: str
    channel: str
    comparator: str
    threshold: float
    response: Action
    priority: Priority = Priority.DEFAULT
    need: str | None = None  # drive that ranks appetitive firings

    def __post_init__(self):
        if self.comparator not in _CMP:
            raise ValueError(f"unknown comparator {self.comparator!r}")
        if not math.isfinite(self.threshold):
            raise ValueError(f"reflex {self.name}: threshold must be finite")

    def holds(self, channels: Mapping[str, float]) -> bool:
        v = channels.get(self.channel)
        if v is None:
            return False
        return bool(_CMP[self.comparator](v, self.threshold))


@dataclass(frozen=True)
class Firing:
    reflex: Reflex
    order: int
    drive: float = 0.0

    @property
    def priority(self) -> Priority:
        return self.reflex.priority

    @property
    def response(self) -> Action:
        return self.reflex.response


def reactive_evaluate(reflexes: list[Reflex], channels: Mapping[str, float], needs=None) -> list[Firing]:
    """All reflexes whose predicate holds, sorted by (priority, declaration order)."""
    out = []
    for i, r in enumerate(reflexes):
        if r.holds(channels):
            d = needs.drive(r.need) if (needs is not None and r.need and r.need in needs) else 0.0
            out.append(Firing(r, i, d))
    out.sort(key=lambda f: (int(f.priority), f.order))
    return out
