"""Worker proxies: small waypoint loops at their bench, comfort feedback, scripted gestures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .. import rng
from ..actions import Action, Kind
from ..geometry import wrap_angle


@dataclass
class WorkerProxy:
    id: str
    cue: int
    trust: float
    skill: float
    pace: float
    D: float
    sway: float = 0.03
    gestures: dict[int, list[str]] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        self.rng = rng.stream(self.seed, f"worker/{self.id}")
        self.phase = 0.0

    @staticmethod
    def preferred_standoff(trust: float, d_min: float, d_max: float) -> float:
        return d_min + (1.0 - trust) * (d_max - d_min)


def discomfort_intensity(D: float, dist: float | None, scale: float = 0.1) -> float:
    """Proportional to the intrusion depth inside the preferred standoff."""
    if dist is None or dist >= D:
        return 0.0
    return (D - dist) / scale


def worker_step(w: WorkerProxy, world, tick: int, scale: float = 0.1) -> tuple[Action, list[dict]]:
    """Loop motion around the slot plus discomfort/gesture events for this tick."""
    events = []
    bench = world.workers[w.id]["bench"]
    gid = world.benches[bench].gripper
    if gid is not None:
        inten = discomfort_intensity(w.D, world.tool_distance(gid), scale)
        if inten > 0.0:
            events.append({"kind": "discomfort", "worker": w.id, "agent": gid, "bench": bench,
                           "intensity": inten})
    for sym in w.gestures.get(tick, []):
        events.append({"kind": "gesture", "worker": w.id, "bench": bench, "symbol": sym})
    if w.sway <= 0.0:
        return Action(Kind.IDLE), events
    speed = 0.002 + 0.01 * w.pace
    w.phase += speed / w.sway * (1.0 + (w.rng.random() - 0.5) * 0.4)
    sx, sy = world.arena.bench(bench).slot
    tx, ty = sx + w.sway * math.cos(w.phase), sy + w.sway * math.sin(w.phase)
    b = world.bodies[w.id]
    dist = math.hypot(tx - b.x, ty - b.y)
    if dist < 1e-9:
        return Action(Kind.IDLE), events
    err = wrap_angle(math.atan2(ty - b.y, tx - b.x) - b.heading)
    # a balancing robot turns in place before rolling
    v = min(dist, 2 * speed) if abs(err) < 0.5 else 0.0
    return Action(Kind.MOVE, v=v, w=err), events
