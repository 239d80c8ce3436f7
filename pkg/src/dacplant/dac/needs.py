"""Homeostatic needs with capped, expiring allostatic setpoint modulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

DEFAULT_CAP = 0.3


def clamp01(v: float) -> float:
    return 0.0 if v < 0.0 else 1.0 if v > 1.0 else float(v)


@dataclass
class Need:
    level: float
    setpoint: float
    gain: float = 1.0
    delta: float = 0.0
    ttl: int = 0
    source: str | None = None  # endosensing channel copied into the level


@dataclass
class NeedState:
    needs: dict[str, Need] = field(default_factory=dict)
    cap: float = DEFAULT_CAP

    def add(self, name: str, level: float, setpoint: float, gain: float = 1.0,
            source: str | None = None) -> None:
        if gain < 0:
            raise ValueError(f"need {name!r}: gain must be >= 0")
        self.needs[name] = Need(clamp01(level), clamp01(setpoint), float(gain), source=source)

    def __contains__(self, name: str) -> bool:
        return name in self.needs

    def names(self) -> list[str]:
        return list(self.needs)

    def level(self, name: str) -> float:
        return self.needs[name].level

    def set_level(self, name: str, value: float) -> None:
        self.needs[name].level = clamp01(value)

    def effective_setpoint(self, name: str) -> float:
        n = self.needs[name]
        return clamp01(n.setpoint + n.delta)

    def drive(self, name: str) -> float:
        n = self.needs[name]
        return n.gain * (clamp01(n.setpoint + n.delta) - n.level)

    def drives(self) -> dict[str, float]:
        return {k: self.drive(k) for k in self.needs}

    def modulate(self, name: str, delta: float, ttl: int) -> float:
        """Store a setpoint modulation, clamped to the cap. Returns the stored value."""
        if ttl <= 0:
            raise ValueError("modulation ttl must be > 0")
        n = self.needs[name]
        n.delta = max(-self.cap, min(self.cap, float(delta)))
        n.ttl = int(ttl)
        return n.delta

    def clear_modulation(self, name: str) -> None:
        n = self.needs[name]
        n.delta, n.ttl = 0.0, 0

    def copy(self) -> "NeedState":
        return NeedState({k: Need(**vars(v)) for k, v in self.needs.items()}, self.cap)

    def to_dict(self) -> dict:
        return {"cap": self.cap, "needs": {k: dict(vars(v)) for k, v in self.needs.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "NeedState":
        return cls({k: Need(**v) for k, v in d["needs"].items()}, d.get("cap", DEFAULT_CAP))


def update_needs(needs: NeedState, endosensing: Mapping[str, float], dt: int = 1) -> NeedState:
    """Copy sourced levels from endosensing, age modulations by dt, clamp. Mutates and returns."""
    if dt < 1:
        raise ValueError("dt must be >= 1 tick")
    for n in needs.needs.values():
        if n.source is not None and n.source in endosensing:
            n.level = clamp01(endosensing[n.source])
        if n.ttl > 0:
            n.ttl -= dt
            if n.ttl <= 0:
                n.ttl = 0
                n.delta = 0.0
        n.level = clamp01(n.level)
    return needs
