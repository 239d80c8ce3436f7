"""Disassembly gripper: two effector channels (tool and standoff) each run through the DAC stack.

The tool channel learns disassembly sequences per device model by trial and
error; the standoff channel balances task pull against worker discomfort and
remembers each worker's comfortable distance.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .. import rng
from ..actions import Action, Kind
from ..dac.adaptive import AssociationMatrix, adaptive_respond, adaptive_update
from ..dac.arbitration import Layer, arbitrate
from ..dac.encoding import (Layout, endo_block, model_block, progress_block, prototype_encode, who_standoff_block,
                            worker_block)
from ..dac.memory import LTM, STM, LTMParams, Segment
from ..dac.needs import NeedState, update_needs
from ..dac.reflexes import Priority, Reflex, reactive_evaluate
from .gestures import Command, gesture_to_command
from .h5w import h5w_annotate

PARAM_GRID = [(0.5, 0.5)] + [(v, p) for v in (0.25, 0.5, 0.75) for p in (0.25, 0.5, 0.75) if (v, p) != (0.5, 0.5)]
DISASSEMBLY_VIEW = ("model", "progress")
COMFORT_VIEW = ("worker",)
STANDOFF_BIN = 0.05


@dataclass
class GripperParams:
    d_min: float = 0.4
    d_max: float = 1.2
    delta_approach: float = 0.002
    delta_retreat: float = 0.01
    max_standoff: float = 2.0
    stable_window: int = 100
    stable_span: float = 0.05


def gripper_layout(worker_cues: list[int], models: list[str], max_standoff: float) -> Layout:
    bins = int(round(max_standoff / STANDOFF_BIN))
    return Layout([
        worker_block(worker_cues, 1.0),
        model_block(models, 1.0),
        progress_block(4, 2.0),
        endo_block(["busy"], 0.0),
        who_standoff_block(worker_cues, bins, STANDOFF_BIN, 1.0),
    ])


class Gripper:
    kind = "gripper"

    def __init__(self, aid: str, bench: str, standoff: float, params: GripperParams, dac: dict,
                 worker_cues: dict[int, str], models: list[str], seed: int = 0):
        self.id = aid
        self.bench = bench
        self.p = params
        self.standoff = float(standoff)
        self.worker_cues = worker_cues
        self.cue_list = sorted(worker_cues)
        self.layout = gripper_layout(self.cue_list, sorted(models), params.max_standoff)
        self.dmask = self.layout.mask(DISASSEMBLY_VIEW)
        self.cmask = self.layout.mask(COMFORT_VIEW)
        self.amask = self.layout.mask(["who_standoff"])
        self.needs = NeedState(cap=dac["cap"])
        self.needs.add("task", 1.0, 1.0, 1.0)
        self.needs.add("comfort", 1.0, 1.0, 1.0)
        self.needs.add("safety", 1.0, 1.0, 1.0)
        self.reflexes_standoff = [
            Reflex("EStop", "estop", ">=", 1.0, Action(Kind.HOLD), Priority.SAFETY),
            Reflex("Regulate", "worker", ">=", 1.0, Action(Kind.REGULATE), Priority.APPETITIVE, "comfort"),
        ]
        self.reflexes_tool = [
            Reflex("EStop", "estop", ">=", 1.0, Action(Kind.IDLE), Priority.SAFETY),
            Reflex("Search", "workpiece", ">=", 1.0, Action(Kind.STEP), Priority.APPETITIVE, "task"),
        ]
        self.theta_c = dac["theta_c"]
        self.am = AssociationMatrix.zeros(1, self.layout.dim, eta=dac["eta"], rho=dac["rho"],
                                          theta=dac["theta_a"], labels=["retreat"])
        lp = LTMParams(capacity=dac["ltm"], gamma=dac["gamma"], beta=dac["beta"], lam=dac["lam"],
                       theta=dac["theta_c"])
        self.ltm = LTM(lp, self.layout.dim)
        self.stm = STM(dac["stm"])
        self.comfort_stm = STM(1)
        self.rng = rng.stream(seed, f"search/{aid}")
        self.stopped = False
        self.rest = False
        self.estop = False
        self.speed = 1.0
        self.tick = 0
        self.attempts: dict[int, int] = {}  # device uid -> step attempts
        self.completed: list[tuple[str, int]] = []  # (model, attempts) per finished device
        self._search: dict = {}
        self._pending: tuple | None = None  # (action, proto, h5w, from_recall seq index or None)
        self._hist: deque = deque(maxlen=params.stable_window)
        self._disc_hist: deque = deque(maxlen=params.stable_window)
        self._who = None
        self.comfort_known: set[str] = set()
        self.last_layer = {"tool": None, "standoff": None}
        self.last_cmd = Action(Kind.IDLE)

    # -- helpers --------------------------------------------------------------------
    def _view(self, proto: np.ndarray, mask: np.ndarray) -> np.ndarray:
        v = np.where(mask, proto, 0.0)
        n = float(np.sqrt(v @ v))
        return v / n if n > 0 else v

    def _commands(self, frame) -> None:
        for _w, sym in frame.gestures:
            c = gesture_to_command(sym)
            if c == Command.STOP:
                self.stopped = True
            elif c == Command.START:
                self.stopped = False
                self.rest = False
            elif c == Command.REST:
                self.rest = True
            elif c == Command.SPEED_UP:
                self.speed = min(2.0, self.speed * 1.5)
            elif c == Command.SLOW_DOWN:
                self.speed = max(0.25, self.speed / 1.5)

    # -- main step --------------------------------------------------------------------
    def act(self, frame, tick: int) -> Action:
        self.tick = tick
        self.note_frame(frame)
        self._commands(frame)
        update_needs(self.needs, frame.endosensing, 1)
        self.standoff = float(frame.endosensing.get("standoff", self.standoff))
        wp = frame.workpiece
        self.needs.set_level("task", 1.0 if wp is None else len(wp[1]) / 4.0)
        self.needs.set_level("comfort", max(0.0, 1.0 - frame.discomfort))
        who = h5w_annotate(frame, self.worker_cues, None, self.bench, tick, None).who
        if who != self._who:
            self._hist.clear()
            self._disc_hist.clear()
            self._who = who
        ctx = {"standoff": self.standoff}
        proto = prototype_encode(frame, self.layout, ctx)
        if self.stopped:
            self.last_layer = {"tool": "command", "standoff": "command"}
            self.last_cmd = Action(Kind.IDLE, standoff=self.standoff)
            return self.last_cmd
        # adaptive learning: discomfort is the US for anticipatory retreat
        acs = self._view(proto, self.amask)
        if frame.discomfort > 0.0 and acs.any():
            adaptive_update(self.am, acs, 0, min(1.0, frame.discomfort))
        new_s = self._standoff_channel(frame, proto, acs, who, tick)
        tool = self._tool_channel(frame, proto, who, tick)
        self._hist.append(new_s)
        self._disc_hist.append(frame.discomfort > 0.0)
        self._maybe_consolidate_comfort(proto, who, tick)
        self.standoff = new_s
        self.last_cmd = tool.replace(standoff=new_s)
        return self.last_cmd

    def _standoff_channel(self, frame, proto, acs, who, tick) -> float:
        s = self.standoff
        if self.rest:
            self.last_layer["standoff"] = "command"
            return self.p.d_max
        ch = {"estop": 1.0 if self.estop else 0.0, "worker": 1.0 if who is not None else 0.0}
        firings = reactive_evaluate(self.reflexes_standoff, ch, self.needs)
        ctx_prop = None
        if who is not None and len(self.ltm):
            cv = self._view(proto, self.cmask)
            r = self.ltm.select(cv, "comfort", tick, commit=False)
            if r is not None and r[0].standoff is not None and abs(r[0].standoff - s) > self.p.delta_retreat:
                self.ltm.select(cv, "comfort", tick)
                ctx_prop = (r[0], r[1])
        ada_prop = None
        if who is not None and acs.any():
            r = adaptive_respond(self.am, acs)
            if r is not None:
                ada_prop = (Action(Kind.REGULATE, ref="retreat"), r[1])
        dec = arbitrate(firings, ctx_prop, ada_prop, self.theta_c, self.am.theta, Action(Kind.HOLD))
        self.last_layer["standoff"] = dec.layer.value
        a = dec.action
        if a.kind == Kind.SET_STANDOFF:
            s = a.standoff
        elif a.kind == Kind.REGULATE:
            if a.ref == "retreat":
                s += self.p.delta_retreat
            else:
                s += -self.p.delta_approach * self.speed + self.p.delta_retreat * frame.discomfort
        return min(self.p.max_standoff, max(0.0, s))

    def _tool_channel(self, frame, proto, who, tick) -> Action:
        wp = frame.workpiece
        busy = frame.endosensing.get("busy", 0.0) >= 1.0
        if wp is None or busy or self.rest:
            self.last_layer["tool"] = "idle"
            return Action(Kind.IDLE)
        ch = {"estop": 1.0 if self.estop else 0.0, "workpiece": 1.0}
        firings = reactive_evaluate(self.reflexes_tool, ch, self.needs)
        goal = f"disassemble:{wp[0]}"
        dv = self._view(proto, self.dmask)
        ctx_prop = None
        recall_si = None
        if len(self.ltm):
            r = self.ltm.select(dv, goal, tick)
            if r is not None:
                ctx_prop = (r[0], r[1])
                recall_si = r[2][0]
        dec = arbitrate(firings, ctx_prop, None, self.theta_c, self.am.theta, Action(Kind.IDLE))
        self.last_layer["tool"] = dec.layer.value
        a = dec.action
        if dec.layer == Layer.APPETITIVE:
            a = self._search_step(frame)
        if a.kind != Kind.STEP:
            return Action(Kind.IDLE)
        h = h5w_annotate(frame, self.worker_cues, wp[0], self.bench, tick, goal,
                         {"component": a.component, "velocity": a.velocity, "pressure": a.pressure})
        key = (wp[0], wp[1])
        self._pending = (a, dv, h, recall_si if dec.layer == Layer.CONTEXTUAL else None, key)
        return a

    def _search_state(self, key) -> dict:
        st = self._search.get(key)
        if st is None:
            st = {"wrong": set(), "next": None, "pi": 0}
            self._search = {key: st}
        return st

    def _search_step(self, frame) -> Action:
        """Trial-and-error: random untried component, params walked over a grid."""
        model, removed = frame.workpiece
        st = self._search_state((model, removed))
        if st["next"] is None:
            cands = [c for c in range(4) if c not in removed and c not in st["wrong"]]
            if not cands:
                st["wrong"].clear()
                cands = [c for c in range(4) if c not in removed]
            st["try"] = cands[self.rng.randrange(len(cands))]
            c = st["try"]
        else:
            c = st["next"]
        v, p = PARAM_GRID[st["pi"] % len(PARAM_GRID)]
        return Action(Kind.STEP, component=c, velocity=v, pressure=p)

    # -- feedback -------------------------------------------------------------------------
    def observe(self, events: list[dict]) -> None:
        for e in events:
            if e.get("agent") != self.id or e["kind"] != "step":
                if e["kind"] == "device_done" and e.get("bench") == self.bench:
                    self._device_done(e)
                continue
            self._step_result(e)

    def _step_result(self, e: dict) -> None:
        pend, self._pending = self._pending, None
        res = e["result"]
        if res in ("NoDevice", "Busy"):
            return
        uid_key = e.get("uid", self.bench)
        self.attempts[uid_key] = self.attempts.get(uid_key, 0) + 1
        if pend is None:
            return
        a, dv, h, recall_si, key = pend
        st = self._search_state(key)
        if res == "Success":
            self.stm.push(Segment(dv, a, h, (self.id, e["tick"])))
            self._search = {}
        elif res == "WrongOrder":
            if recall_si is not None and recall_si < len(self.ltm.sequences):
                s = self.ltm.sequences[recall_si]
                s.value *= 0.5
                self.ltm._touch()
            if st["next"] is None:
                st["wrong"].add(a.component)
        elif res == "BadParams":
            if recall_si is not None and recall_si < len(self.ltm.sequences):
                self.ltm.sequences[recall_si].value *= 0.5
                self.ltm._touch()
            st["next"] = a.component
            st["pi"] += 1

    def _device_done(self, e: dict) -> None:
        n = self.attempts.pop(self.bench, 0)
        self.completed.append((e["model"], n))
        self.ltm.consolidate(self.stm, f"disassemble:{e['model']}", 1.0, e["tick"], self.id)

    def _maybe_consolidate_comfort(self, proto, who, tick) -> None:
        if who is None or who in self.comfort_known:
            return
        if len(self._hist) < self._hist.maxlen or not any(self._disc_hist):
            return
        if max(self._hist) - min(self._hist) > self.p.stable_span:
            return
        d = float(np.mean(self._hist))
        cv = self._view(proto, self.cmask)
        h = h5w_annotate_who(who, self.bench, tick, d)
        self.comfort_stm.push(Segment(cv, Action(Kind.SET_STANDOFF, standoff=d), h, (self.id, tick)))
        self.ltm.consolidate(self.comfort_stm, "comfort", 1.0, tick, self.id)
        self.comfort_known.add(who)

    # -- plant interface ----------------------------------------------------------------------
    def snapshot(self, tick: int, frame=None) -> dict:
        return {
            "id": self.id, "kind": self.kind, "tick": tick, "bench": self.bench, "standoff": self.standoff,
            "worker": self._who, "layer": self.last_layer.get("tool"), "hazard": {"estop": self.estop},
            "drives": {k: round(v, 6) for k, v in self.needs.drives().items()},
            "bins": self.bins_state, "queue": self.queue_len, "busy": self.busy,
        }

    bins_state: dict = {}
    queue_len: int = 0
    busy: bool = False

    def note_frame(self, frame) -> None:
        self.bins_state = {m: frac for _i, _b, m, frac, _br, _r in frame.bins}
        self.queue_len = int(frame.endosensing.get("queue", 0))
        self.busy = frame.endosensing.get("busy", 0.0) >= 1.0 or frame.workpiece is not None

    def receive(self, env) -> None:
        kind, pl = env.kind, env.payload
        if kind == "GlobalReflex":
            self.estop = pl["command"] == "EStop"
        elif kind == "Orchestrator":
            if pl["need"] in self.needs:
                self.needs.modulate(pl["need"], pl["delta"], pl["ttl"])
        elif kind == "LtmExchange":
            self.ltm.merge(pl["sequences"], self.tick)

    def relevant(self, seq) -> bool:
        return any(seg.h5w.who is not None for seg in seq.segments)


def h5w_annotate_who(who, bench, tick, standoff):
    from ..dac.memory import H5W
    return H5W(who, "standoff", bench, tick, "comfort", {"standoff": standoff})
