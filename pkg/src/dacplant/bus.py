"""Simulated wireless bus between agents and the plant level.

Four loop kinds travel on it. Delivery is deterministic: envelopes become
deliverable ``latency`` ticks after posting and come out sorted by
(sender, seq). Random drops are drawn at delivery time from a seeded stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from . import rng

LOOP_KINDS = ("Sensory", "Orchestrator", "LtmExchange", "GlobalReflex")


class BusError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    tick: int
    sender: str
    seq: int
    kind: str
    payload: Any
    dest: str | None = None  # None broadcasts to every registered agent (plant-originated)

    def __post_init__(self):
        if self.kind not in LOOP_KINDS:
            raise BusError(f"unknown loop kind {self.kind!r}")

    def header(self) -> dict:
        return {"tick": self.tick, "sender": self.sender, "seq": self.seq, "kind": self.kind, "dest": self.dest}


@dataclass
class ChannelConfig:
    central: bool = True
    latency: int = 1
    drop: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.latency < 1:
            raise BusError("latency must be >= 1 tick")
        if not 0.0 <= self.drop < 1.0:
            raise BusError("drop probability must be in [0, 1)")


@dataclass
class Bus:
    cfg: ChannelConfig
    senders: set = field(default_factory=set)
    pending: dict = field(default_factory=dict)  # delivery tick -> list of envelopes
    posted: int = 0
    delivered: int = 0
    dropped: int = 0
    discarded: int = 0
    _seq: dict = field(default_factory=dict)
    _last_tick: int = -1

    def __post_init__(self):
        self._rng = rng.stream(self.cfg.seed, "bus/drop")

    def register(self, sender: str) -> None:
        self.senders.add(sender)
        self._seq.setdefault(sender, 0)

    def post(self, tick: int, sender: str, kind: str, payload: Any, dest: str | None = None) -> Envelope | None:
        """Enqueue for delivery at tick + latency. Returns None if the central switch discards it."""
        if sender not in self.senders:
            raise BusError(f"post from unregistered sender {sender!r}")
        self._seq[sender] += 1
        env = Envelope(int(tick), sender, self._seq[sender], kind, payload, dest)
        if not self.cfg.central:
            self.discarded += 1
            return None
        self.posted += 1
        self.pending.setdefault(env.tick + self.cfg.latency, []).append(env)
        return env

    def deliver(self, tick: int) -> list[Envelope]:
        if tick < self._last_tick:
            raise BusError(f"deliver ticks must not decrease ({tick} < {self._last_tick})")
        self._last_tick = tick
        due = []
        for t in sorted(k for k in self.pending if k <= tick):
            due.extend(self.pending.pop(t))
        due.sort(key=lambda e: (e.sender, e.seq))
        out = []
        for e in due:
            if self.cfg.drop > 0.0 and self._rng.random() < self.cfg.drop:
                self.dropped += 1
                continue
            out.append(e)
        self.delivered += len(out)
        return out

    def in_flight(self) -> int:
        return sum(len(v) for v in self.pending.values())

    def conserved(self) -> bool:
        return self.posted == self.delivered + self.dropped + self.in_flight()
