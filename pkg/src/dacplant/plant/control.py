"""Plant-level decisions: the E-stop global reflex, the orchestrator and the LTM exchange."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..actions import Action, Kind
from ..dac.memory import MergeError, Sequence, copy_sequence, ltm_merge
from ..dac.reflexes import Priority, Reflex, reactive_evaluate
from ..geometry import cells_on_line
from .hungarian import hungarian
from .percept import CORRIDOR_CELL, PlantPercept

HAZARD_REFLEX = Reflex("EStop", "hazard", ">=", 1.0, Action(Kind.STOP), Priority.SAFETY)


@dataclass
class EStopLatch:
    """Latched stop: set on any hazard, released after `release` consecutive hazard-free ticks."""
    release: int = 10
    active: bool = False
    clear: int = 0

    def step(self, percept: PlantPercept) -> str | None:
        """Returns "EStop", "Release" or None (nothing to broadcast this tick)."""
        fired = reactive_evaluate([HAZARD_REFLEX], {"hazard": float(len(percept.hazards))})
        if fired:
            self.clear = 0
            if not self.active:
                self.active = True
                return "EStop"
            return None
        if self.active:
            self.clear += 1
            if self.clear >= self.release:
                self.active = False
                self.clear = 0
                return "Release"
        return None


@dataclass(frozen=True)
class NeedModulation:
    agent: str
    need: str
    delta: float
    ttl: int

    def __post_init__(self):
        if self.ttl <= 0:
            raise ValueError("modulation ttl must be > 0")

    def to_dict(self) -> dict:
        return {"agent": self.agent, "need": self.need, "delta": self.delta, "ttl": self.ttl}


def corridor_congestion(percept: PlantPercept, x0: float, y0: float, x1: float, y1: float,
                        skip: tuple[int, int] | None = None) -> int:
    total = 0
    for c in cells_on_line(x0, y0, x1, y1, CORRIDOR_CELL):
        n = percept.congestion.get(c, 0)
        if c == skip:
            n -= 1  # the robot itself
        total += max(0, n)
    return total


def cost_matrix(percept: PlantPercept, robots: list[str], tasks: list[tuple[str, float, float]],
                w_c: float) -> np.ndarray:
    C = np.zeros((len(robots), len(tasks)))
    for i, rid in enumerate(robots):
        x, y, _ = percept.robots[rid]["pose"]
        own = (int(x // CORRIDOR_CELL), int(y // CORRIDOR_CELL))
        for j, (_t, tx, ty) in enumerate(tasks):
            C[i, j] = math.hypot(tx - x, ty - y) + w_c * corridor_congestion(percept, x, y, tx, ty, own)
    return C


def orchestrate(percept: PlantPercept, tasks: list[tuple[str, float, float]], robots: list[str],
                cap: float, ttl: int, w_c: float) -> list[NeedModulation]:
    """Assign free robots to transport tasks; each pair raises that robot's transport setpoint by +cap."""
    if not tasks or not robots:
        return []
    robots = sorted(robots)
    tasks = sorted(tasks)
    C = cost_matrix(percept, robots, tasks, w_c)
    return [NeedModulation(robots[i], f"transport:{tasks[j][0]}", cap, ttl) for i, j in hungarian(C)]


@dataclass
class Digest:
    agent: str
    kind: str
    dim: int | None
    sequences: list[Sequence]


def ltm_exchange(plant_store: dict[str, list[Sequence]], digests: list[Digest], relevant,
                 known: dict[str, set]) -> tuple[dict[str, list[Sequence]], list[str]]:
    """Merge digests into the per-kind plant store; return per-agent batches and rejected senders.

    `relevant(kind, seq)` filters what each kind receives. `known[agent]` holds the origins that agent
    already reported, so repeated rounds with no new learning deliver nothing.
    """
    rejected = []
    for d in sorted(digests, key=lambda d: d.agent):
        cur = plant_store.get(d.kind, [])
        dim = cur[0].dim() if cur else None
        try:
            plant_store[d.kind] = ltm_merge(cur, [copy_sequence(s) for s in d.sequences], dim)
        except MergeError:
            rejected.append(d.agent)
            continue
        known[d.agent] = {s.origin for s in d.sequences}
    batches = {}
    for d in sorted(digests, key=lambda d: d.agent):
        if d.agent in rejected:
            continue
        mine = known.get(d.agent, set())
        out = [copy_sequence(s) for s in plant_store.get(d.kind, [])
               if s.origin not in mine and relevant(d.kind, s)]
        batches[d.agent] = out
    return batches, rejected
