"""The deterministic tick loop tying world, agents, bus and plant together.

Order within one tick t:
  1. bus delivers envelopes due at t (agents and plant receive them)
  2. workers move and emit discomfort/gestures (visible to grippers this tick)
  3. every agent senses and acts, sorted by id
  4. the world integrates all actions
  5. agents observe the world events
  6. agents post snapshots (and memory digests on exchange ticks)
  7. the plant aggregates, decides and posts
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from . import config as cfgmod
from .actions import Action, Kind
from .agents.gripper import Gripper, GripperParams
from .agents.mobile import MobileParams, MobileRobot
from .agents.worker import WorkerProxy, worker_step
from .bus import Bus, ChannelConfig
from .dac import snapshot as snap
from .dac.adaptive import AssociationMatrix
from .dac.memory import LTMParams
from .eventlog import EventLog
from .plant.control import Digest
from .plant.level import PLANT_ID, Plant, PlantParams
from .world.build import build_world

SAFETY_KINDS = (Kind.STOP, Kind.IDLE, Kind.HOLD)


class InvariantViolation(RuntimeError):
    def __init__(self, tick: int, msg: str):
        self.tick = tick
        super().__init__(f"tick {tick}: {msg}")


@dataclass
class RunResult:
    log: EventLog
    sim: "Simulation"
    stats: dict = field(default_factory=dict)


def _bus_record(t: int, env) -> dict:
    rec = {"type": "bus", "t": t, **env.header()}
    if env.kind == "Orchestrator" or env.kind == "GlobalReflex":
        rec["payload"] = env.payload
    elif env.kind == "LtmExchange":
        pl = env.payload
        seqs = pl.sequences if isinstance(pl, Digest) else pl["sequences"]
        rec["payload"] = {"origins": [list(s.origin) for s in seqs]}
    return rec


class Simulation:
    def __init__(self, cfg: dict, seed: int | None = None, central: bool | None = None,
                 log_path: str | None = None, keep_log: bool = True, snapshot_in: dict | None = None,
                 check_invariants: bool = False):
        self.cfg = copy.deepcopy(cfg)
        if seed is not None:
            self.cfg["run"]["seed"] = int(seed)
        if central is not None:
            self.cfg["plant"]["central"] = bool(central)
        self.seed = self.cfg["run"]["seed"]
        self.check = check_invariants
        c = self.cfg
        self.world = build_world(c, self.seed)
        self.arena = self.world.arena
        self.worker_cues = {w["cue"]: w["id"] for w in c["workers"]}
        ag = c["agents"]
        self.mobiles: dict[str, MobileRobot] = {}
        mp_dac = cfgmod.dac_params(c, "mobile")
        for m in c["mobile"]:
            mp = MobileParams(radius=m["radius"], max_v=m["max_speed"], max_w=m["max_turn"], d_stop=ag["d_stop"],
                              reach=c["bins"]["reach"], spacing=ag["segment_spacing"], place_cell=ag["place_cell"],
                              pref_weight=ag["pref_weight"], explore_turn=ag["explore_turn"],
                              need_relax=ag["need_relax"])
            self.mobiles[m["id"]] = MobileRobot(m["id"], self.arena, (m["x"], m["y"], m["heading"]), mp, mp_dac,
                                                c["sensors"], self.worker_cues, self.seed)
        gp_dac = cfgmod.dac_params(c, "gripper")
        models = sorted(self.world.models)
        self.grippers: dict[str, Gripper] = {}
        for g in c["grippers"]:
            gp = GripperParams(ag["d_min"], ag["d_max"], ag["delta_approach"], ag["delta_retreat"])
            self.grippers[g["id"]] = Gripper(g["id"], g["bench"], g["standoff"], gp, gp_dac, self.worker_cues,
                                             models, self.seed)
        self.workers: dict[str, WorkerProxy] = {}
        for w in c["workers"]:
            prof = self.world.workers[w["id"]]
            gest: dict[int, list[str]] = {}
            for t, sym in w["gestures"]:
                gest.setdefault(int(t), []).append(sym)
            self.workers[w["id"]] = WorkerProxy(w["id"], w["cue"], w["trust"], w["skill"], w["pace"], prof["D"],
                                                w["sway"], gest, self.seed)
        self.agents = {**self.mobiles, **self.grippers}
        self.agent_ids = sorted(self.agents)
        pl = c["plant"]
        self.bus = Bus(ChannelConfig(pl["central"], pl["latency"], pl["drop"], self.seed))
        for aid in self.agent_ids:
            self.bus.register(aid)
        self.bus.register(PLANT_ID)
        self.plant = Plant(PlantParams(pl["orchestrate_period"], pl["exchange_period"], pl["estop_release"],
                                       pl["d_crit"], pl["envelope"], pl["w_c"], pl["modulation_ttl"],
                                       c["dac"]["cap"], pl["ema_weight"], pl["throughput_setpoint"],
                                       pl["congestion_setpoint"]),
                           {b.id: (b.x, b.y) for b in self.arena.benches})
        self.swaps: dict[int, list] = {}
        for s in c["swaps"]:
            self.swaps.setdefault(int(s["tick"]), []).append(tuple(s["workers"]))
        if snapshot_in is not None:
            self.load_snapshot(snapshot_in)
        self.tick = 0
        self.inbound_agent = 0  # plant-originated envelopes received by agents
        self.safety_checks = 0
        self.halt_ticks: dict[str, int] = {}
        header = {"seed": self.seed, "config_checksum": cfgmod.checksum(c), "config": c}
        self.log = EventLog(header, log_path, keep_log)

    # -- memory persistence ---------------------------------------------------------
    def load_snapshot(self, doc: dict) -> None:
        for aid in self.agent_ids:
            a = self.agents[aid]
            rec = snap.lookup(doc, aid, a.kind)
            if rec is None:
                continue
            if "ltm" in rec:
                d = rec["ltm"]
                if d["dim"] is not None and d["dim"] != a.layout.dim:
                    raise snap.SnapshotError(f"snapshot LTM dimension {d['dim']} != agent {aid} layout {a.layout.dim}")
                a.ltm = snap.ltm_from_dict(d, LTMParams(**vars(a.ltm.p)))
            if "adaptive" in rec:
                am = AssociationMatrix.from_dict(rec["adaptive"])
                if am.W.shape == a.am.W.shape:
                    a.am.W = am.W
                    a.am.labels = am.labels

    def save_snapshot(self) -> dict:
        agents = {aid: snap.agent_record(self.agents[aid].kind, self.agents[aid].ltm, self.agents[aid].am, None)
                  for aid in self.agent_ids}
        return {"format": snap.FORMAT, "version": snap.VERSION, "agents": agents, "kinds": {}}

    # -- loop -------------------------------------------------------------------------
    def _dispatch(self, t: int) -> None:
        for env in self.bus.deliver(t):
            self.log.append(_bus_record(t, env))
            if env.dest == PLANT_ID:
                self.plant.receive(env)
                continue
            targets = self.agent_ids if env.dest is None else [env.dest]
            for aid in targets:
                a = self.agents.get(aid)
                if a is None:
                    continue
                a.receive(env)
                self.inbound_agent += 1
                if env.kind == "GlobalReflex" and env.payload["command"] == "EStop":
                    self.halt_ticks[aid] = t

    def _workers(self, t: int, actions: dict, events: list) -> None:
        self.world.signals = {}
        scale = self.cfg["agents"]["discomfort_scale"]
        for wid in sorted(self.workers):
            a, evs = worker_step(self.workers[wid], self.world, t, scale)
            actions[wid] = a
            for e in evs:
                sig = self.world.signals.setdefault(e["bench"], {"gestures": [], "discomfort": 0.0})
                if e["kind"] == "discomfort":
                    sig["discomfort"] = e["intensity"]
                else:
                    sig["gestures"].append((wid, e["symbol"]))
                events.append(dict(e, tick=t))

    def _swap(self, t: int, events: list) -> None:
        for a, b in self.swaps.get(t, []):
            ba, bb = self.world.workers[a]["bench"], self.world.workers[b]["bench"]
            self.world.rebind_worker(a, bb)
            self.world.rebind_worker(b, ba)
            events.append({"kind": "swap", "workers": [a, b], "benches": [bb, ba], "tick": t})

    def step(self) -> list[dict]:
        t = self.tick
        pre: list[dict] = []
        self._swap(t, pre)
        self._dispatch(t)
        actions: dict[str, Action] = {}
        self._workers(t, actions, pre)
        for aid in self.agent_ids:
            a = self.agents[aid]
            frame = self.world.sense(aid)
            act = a.act(frame, t)
            if self.check:
                self._check_safety(aid, a, act, t)
            actions[aid] = act
        events = self.world.step(actions)
        for aid in self.agent_ids:
            self.agents[aid].observe(events)
        central = self.cfg["plant"]["central"]
        if central:
            exch = t > 0 and t % self.plant.p.exchange_period == 0
            for aid in self.agent_ids:
                a = self.agents[aid]
                self.bus.post(t, aid, "Sensory", a.snapshot(t), PLANT_ID)
                if exch:
                    dig = Digest(aid, a.kind, a.layout.dim, list(a.ltm.sequences))
                    self.bus.post(t, aid, "LtmExchange", dig, PLANT_ID)
        else:
            self.bus.discarded += len(self.agent_ids)
        for kind, payload, dest in self.plant.decide(t, events):
            self.bus.post(t, PLANT_ID, kind, payload, dest)
        rec = self.world.state_record()
        rec.update(type="state", t=t)
        self.log.append(rec)
        for e in pre + events:
            self.log.append(dict(e, type="event", t=t))
        if self.check:
            errs = self.world.check_invariants()
            if errs:
                raise InvariantViolation(t, "; ".join(errs))
        self.tick = t + 1
        return events

    def _check_safety(self, aid: str, agent, act: Action, t: int) -> None:
        """A latched E-stop or a firing human-stop must yield a halting command."""
        self.safety_checks += 1
        if agent.estop and act.kind == Kind.MOVE and (act.v != 0.0 or act.w != 0.0):
            raise InvariantViolation(t, f"{aid} moved during E-stop")
        if agent.estop and act.kind == Kind.STEP:
            raise InvariantViolation(t, f"{aid} stepped during E-stop")

    def run(self, ticks: int | None = None) -> RunResult:
        n = self.cfg["run"]["ticks"] if ticks is None else int(ticks)
        for _ in range(n):
            self.step()
        self.log.close(self.tick)
        stats = {"bus": {"posted": self.bus.posted, "delivered": self.bus.delivered, "dropped": self.bus.dropped,
                         "discarded": self.bus.discarded},
                 "inbound_agent": self.inbound_agent, "plant_received": self.plant.received}
        return RunResult(self.log, self, stats)


def run(cfg: dict, seed: int | None = None, ticks: int | None = None, **kw) -> RunResult:
    return Simulation(cfg, seed, **kw).run(ticks)
