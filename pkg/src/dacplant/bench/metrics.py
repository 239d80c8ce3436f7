"""Run metrics computed from an event log alone (live or replayed)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from ..eventlog import TruncatedLog
from ..world.build import arena_from_config


@dataclass
class PhaseMetrics:
    episodes: int = 0
    ticks: int = 0
    occupancy: float = 0.0
    trajectory: float = 0.0
    rate: float = 0.0


@dataclass
class RunMetrics:
    ticks: int = 0
    occupancy: float = 0.0
    trajectory: float = 0.0  # mean path length per delivery (m)
    rate: float = 0.0  # deliveries per 1000 ticks
    deliveries: int = 0
    near_miss: int = 0  # ticks with some robot pair closer than d_near
    collisions: int = 0
    entropy: float = 0.0
    entropy_defined: bool = False
    overlap: float = 0.0  # share of visited cells visited by two or more robots
    adapt_error: float = 0.0  # integral of |standoff - D| (m * ticks)
    adapt_error_pre: float = 0.0
    adapt_error_post: float = 0.0
    recovery: int | None = None  # ticks from the first swap until the error drops below eps
    service: dict = field(default_factory=dict)
    phases: list = field(default_factory=list)
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def row(self) -> dict:
        d = self.to_dict()
        d.pop("phases")
        d["service"] = ";".join(f"{k}={v}" for k, v in sorted(self.service.items()))
        return d


def normalized_entropy(counts: list[int], n: int) -> tuple[float, bool]:
    """Shannon entropy of the service distribution over n benches, divided by log(n)."""
    tot = sum(counts)
    if tot == 0 or n < 2:
        return 0.0, False
    h = -sum(c / tot * math.log(c / tot) for c in counts if c > 0)
    return h / math.log(n), True


def _phases(bounds: list[tuple[int, int, float]], visits: list[tuple[int, int]], n_free: int,
            n_phases: int = 3) -> list[PhaseMetrics]:
    """bounds: (start tick, end tick, path length) per episode. visits: (tick, cell index) first-entry list."""
    n = len(bounds)
    out = []
    if n < n_phases:
        return out
    for k in range(n_phases):
        eps = bounds[k * n // n_phases:(k + 1) * n // n_phases]
        t0, t1 = eps[0][0], eps[-1][1]
        cells = {c for t, c in visits if t0 <= t <= t1}
        ticks = t1 - t0 + 1
        out.append(PhaseMetrics(len(eps), ticks, len(cells) / n_free if n_free else 0.0,
                                sum(e[2] for e in eps) / len(eps), len(eps) / (ticks / 1000.0)))
    return out


def compute_metrics(records: list[dict]) -> RunMetrics:
    if not records or records[0].get("type") != "header":
        raise ValueError("log has no header")
    if records[-1].get("type") != "end":
        last = max((r["t"] for r in records if "t" in r), default=-1)
        raise TruncatedLog(last)
    cfg = records[0]["config"]
    arena = arena_from_config(cfg)
    d_near = cfg["bench"]["d_near"]
    eps = cfg["bench"]["eps_adapt"]
    m = RunMetrics(ticks=records[-1]["ticks"])
    n_free = arena.n_free()
    bench_ids = [b.id for b in arena.benches]
    service = {b: 0 for b in bench_ids}
    visited: set = set()
    per_robot_cells: dict[str, set] = {}
    visits: list[tuple[int, int]] = []
    last_pos: dict[str, tuple[float, float]] = {}
    path: dict[str, float] = {}
    ep_start: dict[str, int] = {}
    episodes: list[tuple[int, int, float]] = []
    traj: list[float] = []
    swap_tick = None
    for r in records:
        typ = r.get("type")
        if typ == "state":
            t = r["t"]
            mob = r["mobile"]
            ids = sorted(mob)
            for rid in ids:
                x, y = mob[rid][0], mob[rid][1]
                i, j = arena.cell_of(x, y)
                c = j * arena.nx + i
                if arena.free[j, i]:
                    visited.add(c)
                    per_robot_cells.setdefault(rid, set()).add(c)
                    visits.append((t, c))
                if rid in last_pos:
                    px, py = last_pos[rid]
                    path[rid] = path.get(rid, 0.0) + math.hypot(x - px, y - py)
                else:
                    path[rid] = 0.0
                    ep_start[rid] = t
                last_pos[rid] = (x, y)
            close = False
            for a in range(len(ids)):
                xa, ya = mob[ids[a]][0], mob[ids[a]][1]
                for b in range(a + 1, len(ids)):
                    xb, yb = mob[ids[b]][0], mob[ids[b]][1]
                    if math.hypot(xa - xb, ya - yb) < d_near:
                        close = True
                        break
                if close:
                    break
            m.near_miss += close
            errs = [abs(s - D) for s, D in r["grippers"].values() if D is not None]
            if errs:
                e = sum(errs)
                m.adapt_error += e
                if swap_tick is None:
                    m.adapt_error_pre += e
                else:
                    m.adapt_error_post += e
                    if m.recovery is None and max(errs) < eps:
                        m.recovery = t - swap_tick
        elif typ == "event":
            k = r["kind"]
            if k == "delivery":
                rid = r["agent"]
                m.deliveries += 1
                if r.get("bench") in service:
                    service[r["bench"]] += 1
                traj.append(path.get(rid, 0.0))
                episodes.append((ep_start.get(rid, r["t"]), r["t"], path.get(rid, 0.0)))
                path[rid] = 0.0
                ep_start[rid] = r["t"] + 1
            elif k == "collision":
                m.collisions += 1
            elif k == "swap" and swap_tick is None:
                swap_tick = r["t"]
    m.occupancy = len(visited) / n_free if n_free else 0.0
    m.trajectory = sum(traj) / len(traj) if traj else 0.0
    m.rate = m.deliveries / (m.ticks / 1000.0) if m.ticks else 0.0
    m.service = service
    m.entropy, m.entropy_defined = normalized_entropy([service[b] for b in bench_ids], len(bench_ids))
    if len(per_robot_cells) >= 2 and visited:
        counts: dict[int, int] = {}
        for cells in per_robot_cells.values():
            for c in cells:
                counts[c] = counts.get(c, 0) + 1
        m.overlap = sum(1 for v in counts.values() if v >= 2) / len(visited)
    if len(per_robot_cells) == 1:
        m.phases = [asdict(p) for p in _phases(episodes, visits, n_free)]
    m.degenerate = m.deliveries == 0
    return m
