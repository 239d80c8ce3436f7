"""Plant-level perception: a deterministic fold of agent snapshots into one percept."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..geometry import point_segment_distance

CORRIDOR_CELL = 1.0
WORKER_RADIUS = 0.25


class PerceptError(ValueError):
    pass


@dataclass
class BenchView:
    id: str
    taken: bool = False
    worker: str | None = None
    fill: float = 0.0  # fullest bin fraction
    queue: int = 0
    busy: bool = False


@dataclass
class PlantPercept:
    tick: int
    benches: dict[str, BenchView] = field(default_factory=dict)
    congestion: dict[tuple[int, int], int] = field(default_factory=dict)
    throughput: float = 0.0
    hazards: list[str] = field(default_factory=list)
    robots: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tick": self.tick, "throughput": self.throughput, "hazards": list(self.hazards),
            "benches": {k: vars(v) for k, v in sorted(self.benches.items())},
            "congestion": {f"{i},{j}": n for (i, j), n in sorted(self.congestion.items())},
        }


@dataclass
class ThroughputEMA:
    """Deliveries per window, smoothed across windows."""
    weight: float = 0.1
    window: int = 1000
    value: float = 0.0
    count: int = 0

    def __post_init__(self):
        if not 0.0 < self.weight < 1.0:
            raise PerceptError("EMA weight must be in (0, 1)")

    def fold(self, new: float) -> float:
        self.value = (1.0 - self.weight) * self.value + self.weight * new
        return self.value

    def observe(self, tick: int, deliveries: int) -> None:
        self.count += deliveries
        if (tick + 1) % self.window == 0:
            self.fold(self.count)
            self.count = 0


def cell_of(x: float, y: float, cell: float = CORRIDOR_CELL) -> tuple[int, int]:
    return int(x // cell), int(y // cell)


def hazards(robots: dict[str, dict], d_crit: float, envelope: float) -> list[str]:
    """Danger predicate: a worker in a moving robot's forward envelope, or two robots too close and closing."""
    out = []
    ids = sorted(robots)
    for rid in ids:
        r = robots[rid]
        if r.get("v", 0.0) <= 0.0:
            continue
        x, y, th = r["pose"]
        ex, ey = x + envelope * math.cos(th), y + envelope * math.sin(th)
        reach = r.get("radius", 0.3) + WORKER_RADIUS
        for wid, wx, wy in r.get("humans", []):
            if point_segment_distance(wx, wy, x, y, ex, ey) < reach:
                out.append(f"worker:{wid}:{rid}")
    for k, a in enumerate(ids):
        ra = robots[a]
        for b in ids[k + 1:]:
            rb = robots[b]
            (xa, ya, ta), (xb, yb, tb) = ra["pose"], rb["pose"]
            dx, dy = xb - xa, yb - ya
            dist = math.hypot(dx, dy)
            gap = dist - ra.get("radius", 0.3) - rb.get("radius", 0.3)
            if gap >= d_crit:
                continue
            # rate of change of the centre distance; negative means closing
            va, vb = ra.get("v", 0.0), rb.get("v", 0.0)
            rel = (vb * math.cos(tb) - va * math.cos(ta)) * dx + (vb * math.sin(tb) - va * math.sin(ta)) * dy
            if rel < 0.0:
                out.append(f"robots:{a}:{b}")
    return out


def aggregate(snapshots: list[dict], tick: int, bench_ids: list[str], ema: ThroughputEMA,
              deliveries: int = 0, d_crit: float = 0.3, envelope: float = 0.5) -> PlantPercept:
    seen = set()
    for s in snapshots:
        if s["id"] in seen:
            raise PerceptError(f"duplicate snapshot for agent {s['id']!r} at tick {tick}")
        seen.add(s["id"])
    p = PlantPercept(tick, {b: BenchView(b) for b in bench_ids})
    ema.observe(tick, deliveries)
    p.throughput = ema.value
    for s in sorted(snapshots, key=lambda s: s["id"]):
        if s["kind"] == "gripper":
            bv = p.benches.get(s["bench"])
            if bv is None:
                continue
            bv.worker = s.get("worker")
            bv.taken = bv.worker is not None
            fills = list(s.get("bins", {}).values())
            bv.fill = max(fills) if fills else 0.0
            bv.queue = int(s.get("queue", 0))
            bv.busy = bool(s.get("busy", False))
        elif s["kind"] == "mobile":
            p.robots[s["id"]] = s
            c = cell_of(s["pose"][0], s["pose"][1])
            p.congestion[c] = p.congestion.get(c, 0) + 1
    p.hazards = hazards(p.robots, d_crit, envelope)
    return p
