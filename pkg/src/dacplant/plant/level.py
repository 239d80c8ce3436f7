"""The large-scale level: one more DAC-style loop on top of the agents.

It reads agent snapshots off the bus, keeps plant needs, broadcasts the E-stop
reflex, modulates agent needs through the orchestrator and redistributes
long-term memory.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..dac.needs import NeedState
from .control import Digest, EStopLatch, ltm_exchange, orchestrate
from .percept import PlantPercept, ThroughputEMA, aggregate

PLANT_ID = "plant"


@dataclass
class PlantParams:
    orchestrate_period: int = 10
    exchange_period: int = 200
    estop_release: int = 10
    d_crit: float = 0.3
    envelope: float = 0.5
    w_c: float = 0.5
    modulation_ttl: int = 40
    cap: float = 0.3
    ema_weight: float = 0.1
    throughput_setpoint: float = 10.0
    congestion_setpoint: float = 1.0


def route_relevant(kind: str, seq) -> bool:
    if kind == "gripper":
        return any(seg.h5w.who is not None for seg in seq.segments)
    return seq.goal.startswith("fetch:") or seq.goal in ("deliver", "charge")


class Plant:
    def __init__(self, params: PlantParams, benches: dict[str, tuple[float, float]]):
        self.p = params
        self.bench_xy = benches
        self.latch = EStopLatch(params.estop_release)
        self.ema = ThroughputEMA(params.ema_weight)
        self.needs = NeedState(cap=params.cap)
        self.needs.add("throughput", 0.0, 1.0)
        self.needs.add("congestion", 1.0, 1.0)
        self.needs.add("fairness", 1.0, 1.0)
        self.store: dict[str, list] = {}
        self.known: dict[str, set] = {}
        self.served: dict[str, int] = {b: 0 for b in benches}
        self.snapshots: list[dict] = []
        self.digests: list[Digest] = []
        self.percept: PlantPercept | None = None
        self.assigned: dict[str, str] = {}  # robot -> bench of its current transport assignment
        self.received = 0

    def receive(self, env) -> None:
        self.received += 1
        if env.kind == "Sensory":
            self.snapshots.append(env.payload)
        elif env.kind == "LtmExchange":
            self.digests.append(env.payload)

    def _update_needs(self, p: PlantPercept) -> None:
        sp = max(self.p.throughput_setpoint, 1e-9)
        self.needs.set_level("throughput", p.throughput / sp)
        peak = max(p.congestion.values(), default=0)
        self.needs.set_level("congestion", 1.0 if peak <= self.p.congestion_setpoint else
                             self.p.congestion_setpoint / peak)
        tot = sum(self.served.values())
        if tot:
            self.needs.set_level("fairness", min(self.served.values()) * len(self.served) / tot)

    def decide(self, tick: int, events: list[dict]) -> list[tuple[str, dict, str | None]]:
        """Returns (loop kind, payload, dest) messages to post this tick."""
        out: list[tuple[str, dict, str | None]] = []
        deliveries = 0
        for e in events:
            if e["kind"] == "delivery":
                deliveries += 1
                if e.get("bench") in self.served:
                    self.served[e["bench"]] += 1
        snaps = {}
        for s in self.snapshots:
            snaps[s["id"]] = s  # keep the latest per agent
        self.snapshots = []
        p = aggregate(list(snaps.values()), tick, sorted(self.bench_xy), self.ema, deliveries,
                      self.p.d_crit, self.p.envelope)
        self.percept = p
        self._update_needs(p)
        cmd = self.latch.step(p)
        if cmd is not None:
            out.append(("GlobalReflex", {"command": cmd, "hazards": list(p.hazards)}, None))
        if tick % self.p.orchestrate_period == 0 and not self.latch.active:
            free = [rid for rid, r in p.robots.items() if not r.get("load") and r.get("goal") != "charge"]
            # a loaded robot keeps its bench until it is free again
            held = {b for rid, b in self.assigned.items() if rid in p.robots and rid not in free}
            tasks = [(b, x, y) for b, (x, y) in self.bench_xy.items() if b not in held]
            for m in orchestrate(p, tasks, free, self.p.cap, self.p.modulation_ttl, self.p.w_c):
                self.assigned[m.agent] = m.need.split(":", 1)[1]
                out.append(("Orchestrator", m.to_dict(), m.agent))
        if self.digests:
            batches, rejected = ltm_exchange(self.store, self.digests, route_relevant, self.known)
            self.digests = []
            for aid in sorted(batches):
                out.append(("LtmExchange", {"sequences": batches[aid], "rejected": False}, aid))
            for aid in rejected:
                out.append(("LtmExchange", {"sequences": [], "rejected": True}, aid))
        return out
