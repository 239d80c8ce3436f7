"""Cross-layer arbitration by strict layer precedence."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..actions import EXPLORE, Action
from .reflexes import Firing, Priority


class Layer(str, Enum):
    SAFETY = "safety"
    CONTEXTUAL = "contextual"
    ADAPTIVE = "adaptive"
    APPETITIVE = "appetitive"
    DEFAULT = "default"


@dataclass(frozen=True)
class Decision:
    action: Action
    layer: Layer
    source: str = ""


def arbitrate(firings: list[Firing], contextual: tuple[Action, float] | None,
              adaptive: tuple[Action, float] | None, theta_c: float = 0.5,
              theta_a: float = 0.5, default: Action = EXPLORE) -> Decision:
    """Safety > contextual > adaptive > appetitive (max drive, then order) > default."""
    for f in firings:
        if f.priority == Priority.SAFETY:
            return Decision(f.response, Layer.SAFETY, f.reflex.name)
    if contextual is not None and contextual[1] >= theta_c:
        return Decision(contextual[0], Layer.CONTEXTUAL)
    if adaptive is not None and adaptive[1] >= theta_a:
        return Decision(adaptive[0], Layer.ADAPTIVE)
    app = [f for f in firings if f.priority == Priority.APPETITIVE]
    if app:
        best = min(app, key=lambda f: (-f.drive, f.order))
        return Decision(best.response, Layer.APPETITIVE, best.reflex.name)
    for f in firings:
        if f.priority == Priority.DEFAULT:
            return Decision(f.response, Layer.DEFAULT, f.reflex.name)
    return Decision(default, Layer.DEFAULT)
