"""Versioned JSON persistence of memories (LTM, association matrix, needs).

Layout of a snapshot document::

    {"format": "dacplant-snapshot", "version": 1,
     "agents": {"<agent id>": {"kind": ..., "ltm": {...}, "adaptive": {...}, "needs": {...}}},
     "kinds": {"<agent kind>": {...same record...}}}

Prototypes are stored sparsely as [index, value] pairs. Loading looks up the
agent id first and falls back to the record for the agent's kind.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from ..actions import Action
from .adaptive import AssociationMatrix
from .memory import H5W, LTM, LTMParams, Segment, Sequence
from .needs import NeedState

FORMAT = "dacplant-snapshot"
VERSION = 1


class SnapshotError(ValueError):
    pass


def _vec_out(v: np.ndarray) -> list:
    nz = np.nonzero(v)[0]
    return [[int(i), float(v[i])] for i in nz]


def _vec_in(pairs: list, dim: int) -> np.ndarray:
    v = np.zeros(dim)
    for i, x in pairs:
        v[i] = x
    return v


def sequence_to_dict(s: Sequence) -> dict:
    return {
        "goal": s.goal, "value": s.value, "uses": s.uses, "origin": list(s.origin),
        "last_used": s.last_used,
        "segments": [{"p": _vec_out(g.prototype), "action": g.action.to_dict(),
                      "h5w": g.h5w.to_dict(), "origin": list(g.origin)} for g in s.segments],
    }


def sequence_from_dict(d: dict, dim: int) -> Sequence:
    segs = [Segment(_vec_in(g["p"], dim), Action.from_dict(g["action"]), H5W.from_dict(g["h5w"]),
                    tuple(g["origin"])) for g in d["segments"]]
    return Sequence(segs, d["goal"], d["value"], d["uses"], tuple(d["origin"]), d["last_used"])


def ltm_to_dict(ltm: LTM) -> dict:
    return {"params": dict(vars(ltm.p)), "dim": ltm.dim, "serial": ltm._serial,
            "sequences": [sequence_to_dict(s) for s in ltm.sequences]}


def ltm_from_dict(d: dict, params: LTMParams | None = None) -> LTM:
    ltm = LTM(params or LTMParams(**d["params"]), d["dim"])
    ltm._serial = d.get("serial", 0)
    ltm.sequences = [sequence_from_dict(s, d["dim"]) for s in d["sequences"]]
    ltm._touch()
    return ltm


def agent_record(kind: str, ltm: LTM | None, am: AssociationMatrix | None, needs: NeedState | None) -> dict:
    rec: dict[str, Any] = {"kind": kind}
    if ltm is not None:
        rec["ltm"] = ltm_to_dict(ltm)
    if am is not None:
        rec["adaptive"] = am.to_dict()
    if needs is not None:
        rec["needs"] = needs.to_dict()
    return rec


def save(path: str | Path, agents: dict[str, dict], kinds: dict[str, dict] | None = None) -> None:
    doc = {"format": FORMAT, "version": VERSION, "agents": agents, "kinds": kinds or {}}
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text())
    return check(doc)


def check(doc: dict) -> dict:
    if doc.get("format") != FORMAT:
        raise SnapshotError(f"not a snapshot document (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise SnapshotError(f"snapshot version {doc.get('version')} unsupported (expected {VERSION})")
    return doc


def lookup(doc: dict, agent_id: str, kind: str) -> dict | None:
    rec = doc["agents"].get(agent_id)
    if rec is None:
        rec = doc["kinds"].get(kind)
    if rec is not None and rec.get("kind", kind) != kind:
        raise SnapshotError(f"snapshot record for {agent_id} is kind {rec['kind']}, agent is {kind}")
    return rec
