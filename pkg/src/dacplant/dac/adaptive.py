"""Adaptive layer: CS -> response associations trained with a US-gated Oja rule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AssociationMatrix:
    W: np.ndarray
    eta: float = 0.05
    rho: float = 0.01
    theta: float = 0.5
    labels: list[str] = field(default_factory=list)

    @classmethod
    def zeros(cls, rows: int, dim: int, **kw) -> "AssociationMatrix":
        return cls(np.zeros((rows, dim)), **kw)

    @property
    def shape(self) -> tuple[int, int]:
        return self.W.shape

    def to_dict(self) -> dict:
        nz = np.nonzero(self.W)
        return {
            "rows": int(self.W.shape[0]), "dim": int(self.W.shape[1]),
            "eta": self.eta, "rho": self.rho, "theta": self.theta, "labels": list(self.labels),
            "nz": [[int(i), int(j), float(self.W[i, j])] for i, j in zip(*nz)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AssociationMatrix":
        W = np.zeros((d["rows"], d["dim"]))
        for i, j, v in d["nz"]:
            W[i, j] = v
        return cls(W, d["eta"], d["rho"], d["theta"], list(d.get("labels", [])))


def adaptive_update(am: AssociationMatrix, cs: np.ndarray, r: int, u: float) -> AssociationMatrix:
    """In place. Row r moves by the Oja step with y' = max(w_r.cs, u); other rows decay passively."""
    cs = np.asarray(cs, dtype=float)
    if cs.shape != (am.W.shape[1],):
        raise ValueError(f"cs dimension {cs.shape} != {am.W.shape[1]}")
    if not cs.any():
        return am
    w = am.W[r]
    y = max(float(w @ cs), float(u))
    am.W[r] = w + am.eta * u * y * (cs - y * w)
    if am.rho > 0.0 and am.W.shape[0] > 1:
        keep = am.W[r].copy()
        am.W *= 1.0 - am.eta * am.rho
        am.W[r] = keep
    return am


def adaptive_respond(am: AssociationMatrix, cs: np.ndarray) -> tuple[int, float] | None:
    """Best row (lowest index on ties) if its activation reaches theta."""
    if not am.W.any():
        return None
    act = am.W @ np.asarray(cs, dtype=float)
    r = int(np.argmax(act))  # argmax returns the first maximum
    c = float(act[r])
    return (r, c) if c >= am.theta else None
