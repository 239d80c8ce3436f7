"""Micro-plant world state and the fixed-timestep integrator."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .. import rng
from ..actions import Action, Kind
from ..geometry import (occluded, point_in_rect, ray_cast, sweep_circle_circle, sweep_circle_segment_list,
                        wrap_angle)
from .arena import MATERIALS, ArenaMap

BACKOFF = 1e-7  # metres left between bodies stopped at contact


class WorldError(RuntimeError):
    pass


class StepResult(str, Enum):
    SUCCESS = "Success"
    WRONG_ORDER = "WrongOrder"
    BAD_PARAMS = "BadParams"
    NO_DEVICE = "NoDevice"
    BUSY = "Busy"


@dataclass
class Body:
    id: str
    kind: str  # mobile | worker
    x: float
    y: float
    heading: float
    radius: float = 0.3
    max_v: float = 0.05
    max_w: float = 0.5
    v: float = 0.0
    w: float = 0.0
    battery: float = 1.0
    load: str | None = None
    enc: tuple[float, float] = (0.0, 0.0)
    cue: int | None = None


@dataclass
class Bin:
    id: str
    material: str
    capacity: int
    x: float
    y: float
    bench: str | None
    items: list = field(default_factory=list)  # (device uid, component) pairs
    carried_by: str | None = None

    @property
    def fill(self) -> int:
        return len(self.items)

    @property
    def full(self) -> bool:
        return len(self.items) >= self.capacity


@dataclass
class DeviceModel:
    id: str
    materials: tuple[str, ...]
    valid_order: tuple[int, ...]
    bands: tuple[tuple[float, float], ...]  # (velocity centre, pressure centre) per component
    tol: float = 0.1
    tools: tuple[str, ...] = ("driver", "driver", "cutter", "pliers")
    durations: tuple[int, ...] = (20, 20, 20, 20)

    def __post_init__(self):
        if sorted(self.materials) != sorted(MATERIALS):
            raise ValueError(f"model {self.id}: each material must appear exactly once")
        if sorted(self.valid_order) != [0, 1, 2, 3]:
            raise ValueError(f"model {self.id}: valid_order must be a permutation of 0..3")


@dataclass
class Device:
    uid: int
    model: str
    removed: set = field(default_factory=set)


@dataclass
class GripperState:
    id: str
    bench: str
    standoff: float
    max_standoff: float = 2.0
    held: tuple | None = None  # (device uid, component, material)
    busy_until: int = 0
    pressure: float = 0.0
    torque: float = 0.0


@dataclass
class BenchState:
    id: str
    worker: str | None
    gripper: str | None = None
    bins: dict = field(default_factory=dict)  # material -> bin id
    queue: deque = field(default_factory=deque)
    current: Device | None = None
    in_transit: int = 0


@dataclass
class SensorFrame:
    proximity: np.ndarray
    cues: list  # (cue id, bearing, range)
    encoder_delta: tuple[float, float] = (0.0, 0.0)
    endosensing: dict = field(default_factory=dict)
    gestures: list = field(default_factory=list)  # (worker id, symbol)
    bins: list = field(default_factory=list)  # (bin id, bench id, material, fill fraction, bearing, range)
    workpiece: tuple | None = None  # (model id, frozenset of removed components)
    discomfort: float = 0.0


@dataclass
class WorldParams:
    rays: int = 8
    max_range: float = 3.0
    fov: float = math.pi
    cue_range: float = 3.0
    reach: float = 0.5
    bin_capacity: int = 4
    replacement_fill: int = 0
    step_duration: int = 20
    fail_duration: int = 5
    drain_idle: float = 0.0
    drain_per_m: float = 0.0
    charge_rate: float = 0.01


class World:
    def __init__(self, arena: ArenaMap, params: WorldParams, seed: int = 0):
        self.arena = arena
        self.p = params
        self.seed = seed
        self.tick = 0
        self.bodies: dict[str, Body] = {}
        self.grippers: dict[str, GripperState] = {}
        self.bins: dict[str, Bin] = {}
        self.benches: dict[str, BenchState] = {}
        self.models: dict[str, DeviceModel] = {}
        self.workers: dict[str, dict] = {}  # worker id -> profile (trust, D, ...)
        self.signals: dict[str, dict] = {}  # bench id -> {"gestures": [...], "discomfort": float}
        self.pending: list[tuple[int, str, str]] = []  # (arrival tick, bench, model)
        self.delivered: list[Bin] = []
        self._bin_serial = 0
        self._dev_serial = 0
        self._fill_rng = rng.stream(seed, "world/fill")
        self._conv_rng = rng.stream(seed, "world/conveyor")
        self.arrival_period = 0
        self.queue_max = 2
        k = params.rays
        self.ray_offsets = np.array([2.0 * math.pi * i / k for i in range(k)])
        self.ray_offsets = np.array([wrap_angle(a) for a in self.ray_offsets])
        for bs in arena.benches:
            st = BenchState(bs.id, bs.worker)
            self.benches[bs.id] = st
            for m in bs.materials:
                self._spawn_bin(bs.id, m, 0)

    # -- construction ---------------------------------------------------------
    def _spawn_bin(self, bench: str, material: str, fill: int) -> Bin:
        bs = self.arena.bench(bench)
        self._bin_serial += 1
        b = Bin(f"bin{self._bin_serial}", material, self.p.bin_capacity, bs.x, bs.y, bench)
        b.items = [(-1, -1)] * min(fill, b.capacity)
        self.bins[b.id] = b
        self.benches[bench].bins[material] = b.id
        return b

    def add_body(self, body: Body) -> None:
        if body.id in self.bodies or body.id in self.grippers:
            raise WorldError(f"duplicate agent id {body.id}")
        self.bodies[body.id] = body

    def place(self, aid: str, x: float, y: float, heading: float) -> None:
        """Teleport a body at rest (used by supervised pretraining)."""
        b = self.bodies[aid]
        b.x, b.y, b.heading = float(x), float(y), wrap_angle(heading)
        b.v = b.w = 0.0
        b.enc = (0.0, 0.0)

    def add_gripper(self, g: GripperState) -> None:
        if g.id in self.bodies or g.id in self.grippers:
            raise WorldError(f"duplicate agent id {g.id}")
        if g.bench not in self.benches:
            raise WorldError(f"gripper {g.id} references unknown bench {g.bench}")
        self.grippers[g.id] = g
        self.benches[g.bench].gripper = g.id

    def add_model(self, m: DeviceModel) -> None:
        self.models[m.id] = m

    def schedule_device(self, tick: int, bench: str, model: str) -> None:
        travel = 0
        if self.arena.conveyor and self.arena.conveyor_speed > 0:
            bs = self.arena.bench(bench)
            travel = math.ceil(self.arena.conveyor_offset(bs.x, bs.y) / self.arena.conveyor_speed)
        self.pending.append((tick + travel, bench, model))
        self.pending.sort(key=lambda p: (p[0], p[1]))
        self.benches[bench].in_transit += 1

    # -- geometry helpers -----------------------------------------------------
    def tool_point(self, gid: str) -> tuple[float, float]:
        g = self.grippers[gid]
        bs = self.arena.bench(g.bench)
        sx, sy = bs.slot
        ux, uy = bs.gripper_base[0] - sx, bs.gripper_base[1] - sy
        n = math.hypot(ux, uy) or 1.0
        return sx + g.standoff * ux / n, sy + g.standoff * uy / n

    def worker_at(self, bench: str) -> Body | None:
        wid = self.benches[bench].worker
        return self.bodies.get(wid) if wid else None

    def tool_distance(self, gid: str) -> float | None:
        w = self.worker_at(self.grippers[gid].bench)
        if w is None:
            return None
        tx, ty = self.tool_point(gid)
        return math.hypot(tx - w.x, ty - w.y)

    def rebind_worker(self, wid: str, bench: str) -> None:
        """Move a worker to another bench slot (used by swap events)."""
        for st in self.benches.values():
            if st.worker == wid:
                st.worker = None
        self.benches[bench].worker = wid
        b = self.bodies[wid]
        b.x, b.y = self.arena.bench(bench).slot
        self.workers[wid]["bench"] = bench

    # -- sensing ----------------------------------------------------------------
    def sense(self, aid: str) -> SensorFrame:
        if aid in self.grippers:
            return self._sense_gripper(aid)
        if aid not in self.bodies:
            raise WorldError(f"sense: unknown agent {aid}")
        b = self.bodies[aid]
        others = [o for o in self.bodies.values() if o.id != aid]
        centers = np.array([(o.x, o.y) for o in others]) if others else np.zeros((0, 2))
        radii = np.array([o.radius for o in others]) if others else np.zeros(0)
        angles = b.heading + self.ray_offsets
        prox = ray_cast((b.x, b.y), angles, self.arena.seg_a, self.arena.seg_b, centers, radii, self.p.max_range)
        cand: list = [(bs.marker, bs.x, bs.y) for bs in self.arena.benches]
        cand += self.arena.landmarks
        cand += [(o.cue, o.x, o.y) for o in others if o.cue is not None]
        n_cues = len(cand)
        cand += [(bn, bn.x, bn.y) for bn in self.bins.values() if bn.carried_by is None and bn.bench is not None]
        cues, bins = [], []
        for k, item in self._visible(b, cand):
            if k < n_cues:
                cues.append(item)
            else:
                bn, br, rg = item
                bins.append((bn.id, bn.bench, bn.material, bn.fill / bn.capacity, br, rg))
        endo = {"battery": b.battery, "load": 1.0 if b.load else 0.0}
        return SensorFrame(prox, cues, b.enc, endo, [], bins)

    def _visible(self, b: Body, cand: list) -> list:
        """(candidate index, (key, bearing, range)) for candidates in range, in the FOV and unoccluded."""
        if not cand:
            return []
        pts = np.array([(c[1], c[2]) for c in cand], dtype=float)
        dx, dy = pts[:, 0] - b.x, pts[:, 1] - b.y
        rngs = np.hypot(dx, dy)
        bear = (np.arctan2(dy, dx) - b.heading + math.pi) % (2 * math.pi) - math.pi
        ok = (rngs <= self.p.cue_range) & (np.abs(bear) <= self.p.fov / 2 + 1e-12)
        if not ok.any():
            return []
        idx = np.nonzero(ok)[0]
        occ = occluded((b.x, b.y), pts[idx], self.arena.seg_a, self.arena.seg_b)
        return [(int(i), (cand[i][0], float(bear[i]), float(rngs[i]))) for k, i in enumerate(idx) if not occ[k]]

    def _sense_gripper(self, gid: str) -> SensorFrame:
        g = self.grippers[gid]
        st = self.benches[g.bench]
        cues = []
        w = self.worker_at(g.bench)
        if w is not None:
            cues.append((w.cue, 0.0, float(self.tool_distance(gid))))
        sig = self.signals.get(g.bench, {})
        wp = (st.current.model, frozenset(st.current.removed)) if st.current else None
        bins = []
        for m, bid in sorted(st.bins.items()):
            bn = self.bins[bid]
            bins.append((bn.id, st.id, m, bn.fill / bn.capacity, 0.0, 0.0))
        endo = {"pressure": g.pressure, "torque": g.torque,
                "busy": 1.0 if (g.held is not None or g.busy_until > self.tick) else 0.0,
                "standoff": g.standoff, "queue": float(len(st.queue))}
        return SensorFrame(np.zeros(0), cues, (0.0, 0.0), endo, list(sig.get("gestures", [])), bins, wp,
                           float(sig.get("discomfort", 0.0)))

    # -- actions ----------------------------------------------------------------
    def apply_disassembly_step(self, bench: str, component: int, velocity: float, pressure: float,
                               gid: str | None = None) -> StepResult:
        st = self.benches[bench]
        g = self.grippers.get(gid or st.gripper or "")
        if st.current is None:
            return StepResult.NO_DEVICE
        if g is not None and (g.held is not None or g.busy_until > self.tick):
            return StepResult.BUSY
        dev = st.current
        m = self.models[dev.model]
        if component in dev.removed or not 0 <= component < 4:
            res = StepResult.WRONG_ORDER
        else:
            nxt = next(c for c in m.valid_order if c not in dev.removed)
            if component != nxt:
                res = StepResult.WRONG_ORDER
            else:
                vc, pc = m.bands[component]
                if abs(velocity - vc) <= m.tol + 1e-12 and abs(pressure - pc) <= m.tol + 1e-12:
                    res = StepResult.SUCCESS
                else:
                    res = StepResult.BAD_PARAMS
        if g is not None:
            g.pressure = float(pressure)
            g.torque = float(velocity) if res == StepResult.SUCCESS else 0.0
        if res == StepResult.SUCCESS:
            dev.removed.add(component)
            if g is not None:
                g.held = (dev.uid, component, m.materials[component])
                g.busy_until = self.tick + m.durations[component]
            else:
                self._deposit(bench, (dev.uid, component, m.materials[component]))
        elif g is not None:
            g.busy_until = self.tick + self.p.fail_duration
        return res

    def _deposit(self, bench: str, item: tuple) -> bool:
        st = self.benches[bench]
        bid = st.bins.get(item[2])
        if bid is None:
            return False
        bn = self.bins[bid]
        if bn.full or bn.carried_by is not None:
            return False
        bn.items.append((item[0], item[1]))
        return True

    def lift_or_place_bin(self, rid: str, verb: Kind, bin_id: str | None = None) -> dict:
        b = self.bodies[rid]
        if verb == Kind.LIFT:
            if b.load is not None:
                return {"kind": "fault", "agent": rid, "reason": "already loaded"}
            cands = [bn for bn in self.bins.values() if bn.carried_by is None]
            if bin_id is not None:
                cands = [bn for bn in cands if bn.id == bin_id]
            if not cands:
                return {"kind": "fault", "agent": rid, "reason": "no such bin"}
            bn = min(cands, key=lambda c: (math.hypot(c.x - b.x, c.y - b.y), c.id))
            d = math.hypot(bn.x - b.x, bn.y - b.y)
            if d > self.p.reach:
                return {"kind": "fault", "agent": rid, "reason": f"bin out of reach ({d:.3f} m)"}
            bn.carried_by = rid
            b.load = bn.id
            src = bn.bench
            if src is not None and self.benches[src].bins.get(bn.material) == bn.id:
                self._spawn_bin(src, bn.material, self.p.replacement_fill)
            return {"kind": "lift", "agent": rid, "bin": bn.id, "bench": src, "fill": bn.fill}
        if verb == Kind.PLACE:
            if b.load is None:
                return {"kind": "fault", "agent": rid, "reason": "not loaded"}
            bn = self.bins[b.load]
            b.load = None
            bn.carried_by = None
            bn.x, bn.y = b.x, b.y
            if point_in_rect(b.x, b.y, self.arena.sorting):
                del self.bins[bn.id]
                self.delivered.append(bn)
                return {"kind": "delivery", "agent": rid, "bin": bn.id, "bench": bn.bench,
                        "material": bn.material, "fill": bn.fill}
            bn.bench = None
            return {"kind": "drop", "agent": rid, "bin": bn.id}
        raise WorldError(f"bad verb {verb}")

    # -- integrator ---------------------------------------------------------------
    def step(self, actions: dict[str, Action]) -> list[dict]:
        for aid in actions:
            if aid not in self.bodies and aid not in self.grippers:
                raise WorldError(f"action for unknown agent {aid!r} at tick {self.tick}")
        events: list[dict] = []
        t = self.tick
        for aid in sorted(actions):
            a = actions[aid]
            if aid in self.grippers:
                g = self.grippers[aid]
                if a.standoff is not None:
                    g.standoff = min(g.max_standoff, max(0.0, float(a.standoff)))
                if a.kind == Kind.STEP:
                    res = self.apply_disassembly_step(g.bench, int(a.component), float(a.velocity),
                                                      float(a.pressure), aid)
                    ev = {"kind": "step", "agent": aid, "bench": g.bench, "component": a.component,
                          "velocity": a.velocity, "pressure": a.pressure, "result": res.value}
                    if res == StepResult.NO_DEVICE:
                        ev["error"] = "NoDevice"
                    events.append(ev)
                    st = self.benches[g.bench]
                    if st.current is not None and len(st.current.removed) == 4:
                        events.append({"kind": "device_done", "bench": g.bench, "model": st.current.model,
                                       "uid": st.current.uid})
                        st.current = None
            elif a.kind in (Kind.LIFT, Kind.PLACE):
                events.append(self.lift_or_place_bin(aid, a.kind, a.ref))
        self._integrate(actions, events)
        self._advance_devices(events)
        for b in self.bodies.values():
            if b.kind != "mobile":
                continue
            moved = abs(b.enc[0])
            b.battery = max(0.0, b.battery - self.p.drain_idle - self.p.drain_per_m * moved)
            if moved == 0.0 and point_in_rect(b.x, b.y, self.arena.home):
                b.battery = min(1.0, b.battery + self.p.charge_rate)
            if b.load is not None:
                bn = self.bins[b.load]
                bn.x, bn.y = b.x, b.y
        self.tick = t + 1
        for e in events:
            e.setdefault("tick", t)
        return events

    def _integrate(self, actions: dict[str, Action], events: list[dict]) -> None:
        ids = sorted(self.bodies)
        disp = {}
        for i in ids:
            b = self.bodies[i]
            a = actions.get(i)
            if a is not None and a.kind == Kind.MOVE:
                b.v = max(-b.max_v, min(b.max_v, float(a.v)))
                b.w = max(-b.max_w, min(b.max_w, float(a.w)))
            else:
                b.v, b.w = 0.0, 0.0
            disp[i] = [b.v * math.cos(b.heading), b.v * math.sin(b.heading)]
        start = {i: (self.bodies[i].x, self.bodies[i].y) for i in ids}
        remaining = 1.0
        stopped: set[str] = set()
        for _ in range(2 * len(ids) + 4):
            moving = [i for i in ids if i not in stopped and (disp[i][0] or disp[i][1])]
            if not moving:
                break
            best, hits = math.inf, []
            for i in moving:
                b = self.bodies[i]
                d = (disp[i][0] * remaining, disp[i][1] * remaining)
                tau = sweep_circle_segment_list((b.x, b.y), d, b.radius, self.arena.seg_list)
                if tau < best - 1e-15:
                    best, hits = tau, [(i, None)]
                elif tau == best and tau != math.inf:
                    hits.append((i, None))
            for ai, i in enumerate(ids):
                bi = self.bodies[i]
                di = disp[i] if i not in stopped else (0.0, 0.0)
                for j in ids[ai + 1:]:
                    dj = disp[j] if j not in stopped else (0.0, 0.0)
                    if not (di[0] or di[1] or dj[0] or dj[1]):
                        continue
                    bj = self.bodies[j]
                    tau = sweep_circle_circle((bi.x, bi.y), (di[0] * remaining, di[1] * remaining), bi.radius,
                                              (bj.x, bj.y), (dj[0] * remaining, dj[1] * remaining), bj.radius)
                    if tau < best - 1e-15:
                        best, hits = tau, [(i, j)]
                    elif tau == best and tau != math.inf:
                        hits.append((i, j))
            if best == math.inf:
                for i in moving:
                    b = self.bodies[i]
                    b.x += disp[i][0] * remaining
                    b.y += disp[i][1] * remaining
                break
            involved = set()
            for i, j in hits:
                involved.add(i)
                if j is not None:
                    involved.add(j)
                    events.append({"kind": "collision", "a": i, "b": j})
                else:
                    events.append({"kind": "bump", "agent": i})
            for i in moving:
                b = self.bodies[i]
                dx, dy = disp[i][0] * remaining, disp[i][1] * remaining
                f = best
                if i in involved:
                    n = math.hypot(dx, dy)
                    f = max(0.0, best - BACKOFF / n) if n > 0 else 0.0
                b.x += dx * f
                b.y += dy * f
            stopped |= involved
            remaining *= 1.0 - best
            if remaining <= 0.0:
                break
        for i in ids:
            b = self.bodies[i]
            sx, sy = start[i]
            fwd = (b.x - sx) * math.cos(b.heading) + (b.y - sy) * math.sin(b.heading)
            if i in stopped:
                b.v = 0.0
            b.heading = wrap_angle(b.heading + b.w)
            b.enc = (fwd, b.w)

    def _advance_devices(self, events: list[dict]) -> None:
        t = self.tick
        if self.arrival_period and t % self.arrival_period == 0 and self.models:
            ids = sorted(self.models)
            for bid in sorted(self.benches):
                st = self.benches[bid]
                if st.gripper is None:
                    continue
                if len(st.queue) + st.in_transit + (st.current is not None) < self.queue_max:
                    self.schedule_device(t, bid, ids[self._conv_rng.randrange(len(ids))])
        while self.pending and self.pending[0][0] <= t:
            _, bench, model = self.pending.pop(0)
            self._dev_serial += 1
            st = self.benches[bench]
            st.in_transit -= 1
            st.queue.append(Device(self._dev_serial, model))
            events.append({"kind": "arrival", "bench": bench, "model": model, "uid": self._dev_serial})
        for bid in sorted(self.benches):
            st = self.benches[bid]
            if st.current is None and st.queue:
                st.current = st.queue.popleft()
                events.append({"kind": "dock", "bench": bid, "model": st.current.model, "uid": st.current.uid})
            bs = self.arena.bench(bid)
            if bs.fill_period > 0 and (t + 1) % bs.fill_period == 0:
                open_bins = [self.bins[b] for m, b in sorted(st.bins.items()) if not self.bins[b].full]
                if open_bins:
                    bn = open_bins[self._fill_rng.randrange(len(open_bins))]
                    bn.items.append((-1, -1))
        for gid in sorted(self.grippers):
            g = self.grippers[gid]
            if g.held is not None and g.busy_until <= t + 1:
                if self._deposit(g.bench, g.held):
                    events.append({"kind": "deposit", "agent": gid, "bench": g.bench, "material": g.held[2]})
                    g.held = None

    # -- invariants ---------------------------------------------------------------
    def check_invariants(self) -> list[str]:
        errs = []
        for bn in self.bins.values():
            if not 0 <= bn.fill <= bn.capacity:
                errs.append(f"bin {bn.id} fill {bn.fill} outside [0, {bn.capacity}]")
        ids = sorted(self.bodies)
        for k, i in enumerate(ids):
            a = self.bodies[i]
            for j in ids[k + 1:]:
                b = self.bodies[j]
                if math.hypot(a.x - b.x, a.y - b.y) < a.radius + b.radius - 1e-6:
                    errs.append(f"bodies {i} and {j} overlap")
        return errs

    def component_census(self) -> dict[int, int]:
        """Components per device uid across devices, gripper hands and bins (delivered included)."""
        out: dict[int, int] = {}
        for st in self.benches.values():
            for d in ([st.current] if st.current else []) + list(st.queue):
                out[d.uid] = out.get(d.uid, 0) + 4 - len(d.removed)
        for g in self.grippers.values():
            if g.held is not None:
                out[g.held[0]] = out.get(g.held[0], 0) + 1
        for bn in list(self.bins.values()) + self.delivered:
            for uid, _c in bn.items:
                if uid >= 0:
                    out[uid] = out.get(uid, 0) + 1
        return out

    def state_record(self) -> dict[str, Any]:
        """Compact per-tick state used by the metric pipeline."""
        rec: dict[str, Any] = {"mobile": {}, "grippers": {}}
        for i in sorted(self.bodies):
            b = self.bodies[i]
            if b.kind == "mobile":
                rec["mobile"][i] = [b.x, b.y, b.heading]
        for gid in sorted(self.grippers):
            g = self.grippers[gid]
            w = self.worker_at(g.bench)
            D = self.workers[w.id]["D"] if w is not None else None
            rec["grippers"][gid] = [g.standoff, D]
        return rec
