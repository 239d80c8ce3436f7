"""Static arena description: walls, obstacles, zones, benches, conveyor, landmarks."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..geometry import rect_segments

MATERIALS = ("Plastic", "Metal", "Paper", "Hazardous")


class ArenaError(ValueError):
    pass


@dataclass
class BenchSpec:
    id: str
    x: float
    y: float
    marker: int
    slot: tuple[float, float]
    gripper_base: tuple[float, float]
    worker: str | None = None
    materials: tuple[str, ...] = MATERIALS
    fill_period: int = 0  # >0: bins fill by themselves every N ticks (no gripper needed)


@dataclass
class ArenaMap:
    width: float
    height: float
    cell_size: float
    obstacles: list[tuple[float, float, float, float]] = field(default_factory=list)
    home: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
    sorting: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
    benches: list[BenchSpec] = field(default_factory=list)
    landmarks: list[tuple[int, float, float]] = field(default_factory=list)
    conveyor: list[tuple[float, float]] = field(default_factory=list)
    conveyor_speed: float = 0.05

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ArenaError("cell_size must be > 0")
        segs = rect_segments(0.0, 0.0, self.width, self.height)
        for o in self.obstacles:
            segs += rect_segments(*o)
        arr = np.array(segs, dtype=float)
        self.seg_a = arr[:, :2].copy()
        self.seg_b = arr[:, 2:].copy()
        self.seg_list = [tuple(map(float, sg)) for sg in segs]
        self.nx = max(1, math.ceil(self.width / self.cell_size))
        self.ny = max(1, math.ceil(self.height / self.cell_size))
        self.free = np.ones((self.ny, self.nx), dtype=bool)
        for j in range(self.ny):
            for i in range(self.nx):
                cx, cy = (i + 0.5) * self.cell_size, (j + 0.5) * self.cell_size
                if any(o[0] <= cx <= o[2] and o[1] <= cy <= o[3] for o in self.obstacles):
                    self.free[j, i] = False
        self.bench_index = {b.id: k for k, b in enumerate(self.benches)}

    def bench(self, bid: str) -> BenchSpec:
        return self.benches[self.bench_index[bid]]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (min(self.nx - 1, max(0, int(x // self.cell_size))),
                min(self.ny - 1, max(0, int(y // self.cell_size))))

    def in_obstacle(self, x: float, y: float, margin: float = 0.0) -> bool:
        return any(o[0] - margin <= x <= o[2] + margin and o[1] - margin <= y <= o[3] + margin
                   for o in self.obstacles)

    def inside(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    def n_free(self) -> int:
        return int(self.free.sum())

    def validate(self) -> list[str]:
        """Load-time checks; returns a list of problems (empty when valid)."""
        errs = []
        hx, hy = (self.home[0] + self.home[2]) / 2, (self.home[1] + self.home[3]) / 2
        start = self.cell_of(hx, hy)
        if not self.free[start[1], start[0]]:
            errs.append("home zone centre lies inside an obstacle")
            return errs
        # conservative grid for the flood fill: any overlap blocks a cell, so thin walls cannot leak
        open_ = self.free.copy()
        c = self.cell_size
        for o in self.obstacles:
            i0, i1 = max(0, int(o[0] // c)), min(self.nx - 1, math.ceil(o[2] / c) - 1)
            j0, j1 = max(0, int(o[1] // c)), min(self.ny - 1, math.ceil(o[3] / c) - 1)
            open_[j0:j1 + 1, i0:i1 + 1] = False
        open_[start[1], start[0]] = True
        seen = np.zeros_like(self.free)
        seen[start[1], start[0]] = True
        q = deque([start])
        while q:
            i, j = q.popleft()
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if 0 <= a < self.nx and 0 <= b < self.ny and open_[b, a] and not seen[b, a]:
                    seen[b, a] = True
                    q.append((a, b))
        for bs in self.benches:
            if not self.inside(bs.x, bs.y):
                errs.append(f"bench {bs.id} lies outside the arena")
                continue
            if self.in_obstacle(bs.x, bs.y):
                errs.append(f"bench {bs.id} overlaps an obstacle")
                continue
            i, j = self.cell_of(bs.x, bs.y)
            if not seen[j, i] and not any(seen[b, a] for a, b in self._around(i, j)):
                errs.append(f"bench {bs.id} is not reachable from home")
        return errs

    def _around(self, i: int, j: int) -> list[tuple[int, int]]:
        return [(i + di, j + dj) for di in (-1, 0, 1) for dj in (-1, 0, 1)
                if 0 <= i + di < self.nx and 0 <= j + dj < self.ny]

    def conveyor_offset(self, x: float, y: float) -> float:
        """Arc length along the conveyor to the point closest to (x, y)."""
        if len(self.conveyor) < 2:
            return 0.0
        best, acc, arc = math.inf, 0.0, 0.0
        for (ax, ay), (bx, by) in zip(self.conveyor, self.conveyor[1:]):
            ex, ey = bx - ax, by - ay
            L = math.hypot(ex, ey)
            if L == 0:
                continue
            f = max(0.0, min(1.0, ((x - ax) * ex + (y - ay) * ey) / (L * L)))
            d = math.hypot(ax + f * ex - x, ay + f * ey - y)
            if d < best:
                best, arc = d, acc + f * L
            acc += L
        return arc
