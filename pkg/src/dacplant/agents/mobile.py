"""Mobile transport robot: a full DAC stack driving a unicycle base with a lifting platform."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .. import rng
from ..actions import Action, Kind
from ..dac.adaptive import AssociationMatrix, adaptive_respond, adaptive_update
from ..dac.arbitration import Decision, Layer, arbitrate
from ..dac.encoding import Layout, cues_block, endo_block, place_block, prototype_encode, rays_block
from ..dac.memory import LTM, STM, LTMParams, Segment
from ..dac.needs import NeedState, update_needs
from ..dac.reflexes import Firing, Priority, Reflex, reactive_evaluate
from ..geometry import point_in_rect, wrap_angle
from .h5w import h5w_annotate

TURNS = ("left", "ahead", "right")
FULL_SEEN, EMPTY_SEEN, NEUTRAL = 0.4, 0.7, 0.5
ARRIVED = 0.1  # metres; a GOTO target closer than this counts as reached
AVOID_HOLD = 6  # ticks of straight motion after an avoidance turn


@dataclass
class MobileParams:
    radius: float = 0.3
    max_v: float = 0.05
    max_w: float = 0.5
    d_stop: float = 0.5
    reach: float = 0.5
    spacing: float = 0.5
    place_cell: float = 1.0
    pref_weight: float = 0.2
    explore_turn: float = 0.3
    need_relax: float = 0.002
    train_window: float = 2.0  # metres of path before a goal used for cue->turn training


def mobile_layout(arena, rays: int, max_range: float, fov: float, place_cell: float) -> Layout:
    cue_ids = [b.marker for b in arena.benches] + [l[0] for l in arena.landmarks]
    return Layout([
        rays_block(rays, max_range, 1.0),
        cues_block(cue_ids, 4, fov, 1.0),
        place_block(arena.width, arena.height, place_cell, 2.0),
        endo_block(["load"], 0.5),
    ])


class MobileRobot:
    kind = "mobile"

    def __init__(self, aid: str, arena, pose: tuple[float, float, float], params: MobileParams,
                 dac: dict, sensors: dict, worker_cues: dict[int, str], seed: int = 0):
        self.id = aid
        self.arena = arena
        self.p = params
        self.pose = [float(pose[0]), float(pose[1]), float(pose[2])]  # odometry estimate
        self.odo = 0.0
        self.last_seg_odo = -1e9
        self.worker_cues = worker_cues
        self.benches = [b.id for b in arena.benches]
        self.marker_of = {b.marker: b.id for b in arena.benches}
        self.layout = mobile_layout(arena, sensors["rays"], sensors["max_range"], sensors["fov"], params.place_cell)
        self.needs = NeedState(cap=dac["cap"])
        self.needs.add("battery", 1.0, 0.3, 1.0, source="battery")
        self.needs.add("delivery", 1.0, 1.0, 1.0)
        self.needs.add("clearance", 1.0, 0.2, 1.0)
        for b in self.benches:
            self.needs.add(f"transport:{b}", NEUTRAL, NEUTRAL, 1.0)
        home = arena.home
        sort = arena.sorting
        self.home_xy = ((home[0] + home[2]) / 2, (home[1] + home[3]) / 2)
        self.sort_xy = ((sort[0] + sort[2]) / 2, (sort[1] + sort[3]) / 2)
        self.reflexes = [
            Reflex("EStop", "estop", ">=", 1.0, Action(Kind.STOP), Priority.SAFETY),
            Reflex("HumanStop", "human", "<", params.d_stop, Action(Kind.STOP), Priority.SAFETY),
            Reflex("AvoidObstacle", "front", "<", params.radius + 0.25, Action(Kind.AVOID), Priority.SAFETY),
            Reflex("SeekCharge", "battery", "<", 0.2, Action(Kind.SEEK, x=self.home_xy[0], y=self.home_xy[1]),
                   Priority.APPETITIVE, "battery"),
            Reflex("Deliver", "load", ">=", 1.0, Action(Kind.GOTO, x=self.sort_xy[0], y=self.sort_xy[1]),
                   Priority.APPETITIVE, "delivery"),
            Reflex("ApproachBin", "target_bin", ">=", 1.0, Action(Kind.APPROACH), Priority.APPETITIVE),
        ]
        self.theta_c = dac["theta_c"]
        self.am = AssociationMatrix.zeros(len(TURNS), self.layout.dim, eta=dac["eta"], rho=dac["rho"],
                                          theta=dac["theta_a"], labels=list(TURNS))
        self.stm = STM(dac["stm"])
        self.stm_pose: deque = deque(maxlen=dac["stm"])
        self.ltm = LTM(LTMParams(capacity=dac["ltm"], gamma=dac["gamma"], beta=dac["beta"], lam=dac["lam"],
                                 theta=dac["theta_c"]), self.layout.dim)
        self.cue_mask = self.layout.mask(["cues"])
        self.rng = rng.stream(seed, f"explore/{aid}")
        self.explore_w = 0.0
        self.goal: str | None = None
        self.loaded = False
        self.charging = False
        self.estop = False
        self.tutor: tuple[str, float, float] | None = None  # (goal, x, y) set during supervised training
        self.last: Decision | None = None
        self.last_cmd = Action(Kind.STOP)
        self.bins_seen: dict[str, float] = {}
        self.humans: list = []
        self.avoid_dir = 0  # turn direction latched for one avoidance manoeuvre
        self.avoid_hold = 0
        self.stalled = False
        self.proto = np.zeros(self.layout.dim)
        self.tick = 0

    def relocate(self, pose: tuple[float, float, float]) -> None:
        """Reset odometry and short-term memory after the body was placed elsewhere."""
        self.pose = [float(pose[0]), float(pose[1]), float(pose[2])]
        self.stm.clear()
        self.stm_pose.clear()

    # -- perception -------------------------------------------------------------
    def _odometry(self, frame) -> None:
        df, dth = frame.encoder_delta
        last = self.last_cmd
        # bumper: forward motion was commanded but the wheels barely moved
        self.stalled = last.kind == Kind.MOVE and last.v > 0.0 and df < 0.2 * last.v
        x, y, th = self.pose
        self.pose = [x + df * math.cos(th), y + df * math.sin(th), wrap_angle(th + dth)]
        self.odo += abs(df)

    def _update_needs(self, frame) -> None:
        update_needs(self.needs, frame.endosensing, 1)
        self.loaded = frame.endosensing.get("load", 0.0) >= 1.0
        self.needs.set_level("delivery", 0.0 if self.loaded else 1.0)
        self.needs.set_level("clearance", min(frame.proximity) / 3.0 if len(frame.proximity) else 1.0)
        for b in self.benches:
            n = f"transport:{b}"
            x = self.needs.level(n)
            step = self.p.need_relax
            self.needs.set_level(n, x + max(-step, min(step, NEUTRAL - x)))
        per_bench: dict[str, list] = {}
        for bid, bench, _m, frac, _br, rg in frame.bins:
            per_bench.setdefault(bench, []).append((frac, rg))
        self.bins_seen = {}
        for bench, items in per_bench.items():
            if bench not in self.benches:
                continue
            self.bins_seen[bench] = max(f for f, _ in items)
            if any(f >= 1.0 for f, _ in items):
                self.needs.set_level(f"transport:{bench}", FULL_SEEN)
            elif min(r for _, r in items) < 1.5:
                self.needs.set_level(f"transport:{bench}", EMPTY_SEEN)
        bat = frame.endosensing.get("battery", 1.0)
        if bat < 0.2:
            self.charging = True
        elif bat >= 0.95:
            self.charging = False

    def _choose_goal(self, prefs: dict) -> str | None:
        if self.tutor is not None:
            return self.tutor[0]
        if self.loaded:
            return "deliver"
        if self.charging:
            return "charge"
        best, score = None, 0.02
        for b in self.benches:
            g = f"fetch:{b}"
            s = self.needs.drive(f"transport:{b}") + self.p.pref_weight * prefs.get(g, 0.0)
            if g == self.goal:
                s += 0.05  # hysteresis
            if s > score:
                best, score = g, s
        return best

    def channels(self, frame) -> dict:
        human = math.inf
        self.humans = []
        x, y, th = self.pose
        for cid, br, rg in frame.cues:
            if cid in self.worker_cues:
                self.humans.append([self.worker_cues[cid], x + rg * math.cos(th + br), y + rg * math.sin(th + br)])
                if abs(br) <= math.pi / 3:
                    human = min(human, rg - self.p.radius)  # clearance from the robot's rim
        pr = frame.proximity
        front = min(pr[0], pr[1], pr[-1]) if len(pr) else math.inf
        if self.stalled:
            front = 0.0
        target = 0.0
        if self.goal and self.goal.startswith("fetch:"):
            b = self.goal[6:]
            if any(bench == b and frac >= 1.0 for _i, bench, _m, frac, _b, _r in frame.bins):
                target = 1.0
        return {"estop": 1.0 if self.estop else 0.0, "human": human, "front": front,
                "battery": frame.endosensing.get("battery", 1.0), "load": 1.0 if self.loaded else 0.0,
                "target_bin": target}

    # -- main step ----------------------------------------------------------------
    def act(self, frame, tick: int) -> Action:
        self.tick = tick
        self._odometry(frame)
        self._update_needs(frame)
        ctx = {"pose": self.pose}
        proto = prototype_encode(frame, self.layout, ctx)
        self.proto = proto
        prefs = self.ltm.goal_utility()
        self.goal = self._choose_goal(prefs)
        ch = self.channels(frame)
        firings = reactive_evaluate(self.reflexes, ch, self.needs)
        firings = [self._bind(f, frame) for f in firings]
        ctx_prop = None
        ada_prop = None
        if self.tutor is not None:
            ctx_prop = (Action(Kind.GOTO, x=self.tutor[1], y=self.tutor[2]), 1.0)
        elif self.goal is not None and len(self.ltm):
            r = self.ltm.select(proto, self.goal, tick)
            if r is not None:
                ctx_prop = (r[0], r[1])
        if self.goal is not None and self.goal.startswith("fetch:") and self.am.W.any():
            cs = self._cue_view(proto)
            r = adaptive_respond(self.am, cs) if cs.any() else None
            if r is not None:
                ada_prop = (Action(Kind.HEAD, ref=TURNS[r[0]]), r[1])
        dec = arbitrate(firings, ctx_prop, ada_prop, self.theta_c, self.am.theta, Action(Kind.EXPLORE))
        abstract = dec.action
        cmd = None
        if dec.layer != Layer.SAFETY:
            cmd = self._consummatory(frame)
        if dec.layer == Layer.SAFETY and abstract.kind == Kind.AVOID:
            self.avoid_hold = AVOID_HOLD
        elif cmd is None and dec.layer != Layer.SAFETY and self.avoid_hold > 0 and abstract.kind != Kind.EXPLORE:
            # keep clearing the obstacle edge before steering back toward the target
            self.avoid_hold -= 1
            cmd = Action(Kind.MOVE, v=self.p.max_v, w=0.0)
        if cmd is None:
            cmd = self._resolve(abstract, frame)
        self.last = dec
        self.last_cmd = cmd
        if self.odo - self.last_seg_odo >= self.p.spacing:
            self.last_seg_odo = self.odo
            h = h5w_annotate(frame, self.worker_cues, self.goal, self._where(), tick, self.goal,
                             abstract.to_dict())
            self.stm.push(Segment(proto, abstract, h, (self.id, tick)))
            self.stm_pose.append(tuple(self.pose))
        return cmd

    def _where(self) -> str | None:
        x, y = self.pose[0], self.pose[1]
        if point_in_rect(x, y, self.arena.sorting):
            return "sorting"
        if point_in_rect(x, y, self.arena.home):
            return "home"
        best = None
        for b in self.arena.benches:
            d = math.hypot(b.x - x, b.y - y)
            if d < 1.5 and (best is None or d < best[0]):
                best = (d, b.id)
        return best[1] if best else None

    def _cue_view(self, proto: np.ndarray) -> np.ndarray:
        v = np.where(self.cue_mask, proto, 0.0)
        n = float(np.sqrt(v @ v))
        return v / n if n > 0 else v

    def _bind(self, f: Firing, frame) -> Firing:
        """Fill run-time parameters of appetitive responses (targets, drives)."""
        name = f.reflex.name
        if name == "ApproachBin" and self.goal:
            b = self.goal[6:]
            cands = [(rg, br) for _i, bench, _m, frac, br, rg in frame.bins if bench == b and frac >= 1.0]
            rg, br = min(cands)
            x, y, th = self.pose
            tx, ty = x + rg * math.cos(th + br), y + rg * math.sin(th + br)
            r = replace(f.reflex, response=Action(Kind.APPROACH, x=tx, y=ty))
            return Firing(r, f.order, self.needs.drive(f"transport:{b}"))
        if name == "Deliver":
            tx, ty = self._drop_point()
            return Firing(replace(f.reflex, response=Action(Kind.GOTO, x=tx, y=ty)), f.order, f.drive)
        return f

    def _drop_point(self) -> tuple[float, float]:
        """Closest point of the sorting zone, kept a little inside its edges."""
        x0, y0, x1, y1 = self.arena.sorting
        mx, my = min(0.5, (x1 - x0) / 2), min(0.5, (y1 - y0) / 2)
        return min(max(self.pose[0], x0 + mx), x1 - mx), min(max(self.pose[1], y0 + my), y1 - my)

    def _consummatory(self, frame) -> Action | None:
        if not self.loaded:
            want = self.goal[6:] if self.goal and self.goal.startswith("fetch:") else None
            full = [(rg, bid) for bid, bench, _m, frac, _br, rg in frame.bins
                    if frac >= 1.0 and rg <= self.p.reach and (want is None or bench == want)]
            if full:
                return Action(Kind.LIFT, ref=min(full)[1])
        elif point_in_rect(self.pose[0], self.pose[1], self.arena.sorting):
            return Action(Kind.PLACE)
        if self.charging and point_in_rect(self.pose[0], self.pose[1], self.arena.home):
            return Action(Kind.STOP)
        return None

    def _resolve(self, a: Action, frame) -> Action:
        p = self.p
        if a.kind != Kind.AVOID and self.avoid_hold == 0:
            self.avoid_dir = 0
        if a.kind in (Kind.STOP, Kind.IDLE):
            return Action(Kind.STOP)
        if a.kind == Kind.AVOID:
            pr = frame.proximity
            k = len(pr)
            if self.avoid_dir == 0:
                left = pr[1 % k] + pr[2 % k]
                right = pr[-1] + pr[-2]
                self.avoid_dir = 1 if left >= right else -1
            w = p.max_w * self.avoid_dir
            v = 0.0 if pr[0] < p.radius + 0.1 else 0.3 * p.max_v
            return Action(Kind.MOVE, v=v, w=w)
        if a.kind in (Kind.GOTO, Kind.SEEK, Kind.APPROACH) and a.x is not None:
            return self._steer(a.x, a.y)
        if a.kind == Kind.HEAD:
            w = {"left": 0.5, "ahead": 0.0, "right": -0.5}[a.ref] * p.max_w
            return Action(Kind.MOVE, v=p.max_v, w=w)
        return self._explore()

    def _explore(self) -> Action:
        """Persistent random walk."""
        if self.rng.random() < 0.1:
            self.explore_w = (self.rng.random() * 2.0 - 1.0) * self.p.explore_turn
        return Action(Kind.MOVE, v=self.p.max_v, w=self.explore_w)

    def _steer(self, tx: float, ty: float) -> Action:
        x, y, th = self.pose
        dx, dy = tx - x, ty - y
        dist = math.hypot(dx, dy)
        if dist < ARRIVED:
            return self._explore()  # at the remembered spot but the goal is not met: look around
        err = wrap_angle(math.atan2(dy, dx) - th)
        w = max(-self.p.max_w, min(self.p.max_w, err))
        v = self.p.max_v * max(0.0, math.cos(err)) if abs(err) < math.pi / 2 else 0.0
        v = min(v, dist)
        return Action(Kind.MOVE, v=v, w=w)

    # -- learning -----------------------------------------------------------------
    def observe(self, events: list[dict]) -> None:
        for e in events:
            if e.get("agent") != self.id:
                continue
            if e["kind"] == "lift":
                self._goal_reached(f"fetch:{e['bench']}")
            elif e["kind"] == "delivery":
                self._goal_reached("deliver")

    def _goal_reached(self, goal: str) -> None:
        tx, ty = self.pose[0], self.pose[1]
        tick = self.tick
        if goal.startswith("fetch:"):
            self._train_turns(tx, ty)

        def rewrite(seg: Segment) -> Segment:
            h = replace(seg.h5w, why=goal)
            return Segment(seg.prototype, Action(Kind.GOTO, x=tx, y=ty), h, seg.origin)

        self.ltm.consolidate(self.stm, goal, 1.0, tick, self.id, rewrite)
        self.stm_pose.clear()
        if self.tutor is not None and self.tutor[0] == goal:
            self.tutor = None

    def _train_turns(self, tx: float, ty: float) -> None:
        segs = self.stm.segments()
        poses = list(self.stm_pose)
        back = 0.0
        prev = (tx, ty)
        for seg, (x, y, th) in zip(reversed(segs), reversed(poses)):
            back += math.hypot(prev[0] - x, prev[1] - y)
            prev = (x, y)
            if back > self.p.train_window:
                break
            cs = self._cue_view(seg.prototype)
            if not cs.any():
                continue
            err = wrap_angle(math.atan2(ty - y, tx - x) - th)
            r = 0 if err > 0.3 else 2 if err < -0.3 else 1
            adaptive_update(self.am, cs, r, 1.0)

    # -- plant interface ----------------------------------------------------------
    def snapshot(self, tick: int) -> dict:
        return {
            "id": self.id, "kind": self.kind, "tick": tick, "pose": list(self.pose),
            "v": float(self.last_cmd.v) if self.last_cmd.kind == Kind.MOVE else 0.0,
            "load": self.loaded, "battery": self.needs.level("battery"),
            "layer": self.last.layer.value if self.last else None,
            "goal": self.goal, "hazard": {"estop": self.estop},
            "drives": {k: round(v, 6) for k, v in self.needs.drives().items()},
            "bins_seen": dict(self.bins_seen), "humans": list(self.humans), "radius": self.p.radius,
        }

    def receive(self, env) -> None:
        kind, pl = env.kind, env.payload
        if kind == "GlobalReflex":
            self.estop = pl["command"] == "EStop"
        elif kind == "Orchestrator":
            if pl["need"] in self.needs:
                if pl["need"].startswith("transport:"):
                    # one transport assignment at a time: the newest replaces the rest
                    for b in self.benches:
                        self.needs.clear_modulation(f"transport:{b}")
                self.needs.modulate(pl["need"], pl["delta"], pl["ttl"])
        elif kind == "LtmExchange":
            self.ltm.merge(pl["sequences"], self.tick)

    def relevant(self, seq) -> bool:
        return seq.goal.startswith("fetch:") or seq.goal in ("deliver", "charge")
