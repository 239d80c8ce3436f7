"""Anchoring: deterministic featurization of sensor frames into unit prototypes.

A layout is an ordered list of blocks. Each block is filled from the frame (or
from the agent's internal context), scaled to unit norm times the block weight,
and the concatenation is L2-normalized. Masking blocks gives a "view" of the
same dimension, used to key different memories on different channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Block:
    kind: str  # rays | cues | worker | endo | place | goal | model | progress | standoff
    size: int
    weight: float = 1.0
    params: tuple = ()  # kind-specific, hashable


@dataclass
class Layout:
    blocks: list[Block] = field(default_factory=list)

    def __post_init__(self):
        self._offsets = {}
        o = 0
        for b in self.blocks:
            if b.kind in self._offsets:
                raise LayoutError(f"duplicate block {b.kind}")
            self._offsets[b.kind] = (o, o + b.size)
            o += b.size
        self.dim = o

    def span(self, kind: str) -> tuple[int, int]:
        return self._offsets[kind]

    def mask(self, kinds: Sequence[str]) -> np.ndarray:
        m = np.zeros(self.dim, dtype=bool)
        for k in kinds:
            a, b = self._offsets[k]
            m[a:b] = True
        return m

    def view(self, vec: np.ndarray, kinds: Sequence[str]) -> np.ndarray:
        return normalize(np.where(self.mask(kinds), vec, 0.0))


def normalize(v: np.ndarray) -> np.ndarray:
    n = float(np.sqrt(v @ v))
    return v / n if n > 0.0 else np.zeros_like(v)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of already-normalized prototypes; zero vectors match nothing."""
    return float(a @ b)


# -- block builders ---------------------------------------------------------

def rays_block(n: int, max_range: float, weight: float = 1.0) -> Block:
    return Block("rays", n, weight, (float(max_range),))


def cues_block(ids: Sequence[int], bearing_bins: int = 4, fov: float = math.pi, weight: float = 1.0) -> Block:
    return Block("cues", len(ids) * bearing_bins, weight, (tuple(ids), bearing_bins, float(fov)))


def worker_block(ids: Sequence[int], weight: float = 1.0) -> Block:
    return Block("worker", len(ids), weight, (tuple(ids),))


def endo_block(keys: Sequence[str], weight: float = 1.0) -> Block:
    return Block("endo", len(keys), weight, (tuple(keys),))


def place_block(width: float, height: float, cell: float, weight: float = 1.0) -> Block:
    nx, ny = max(1, math.ceil(width / cell)), max(1, math.ceil(height / cell))
    return Block("place", nx * ny, weight, (float(cell), nx, ny))


def goal_block(goals: Sequence[str], weight: float = 1.0) -> Block:
    return Block("goal", len(goals), weight, (tuple(goals),))


def model_block(models: Sequence[str], weight: float = 1.0) -> Block:
    return Block("model", len(models), weight, (tuple(models),))


def progress_block(n_components: int = 4, weight: float = 1.0) -> Block:
    return Block("progress", 2 ** n_components, weight, (n_components,))


def standoff_block(bins: int, top: float, weight: float = 1.0) -> Block:
    return Block("standoff", bins, weight, (float(top),))


def who_standoff_block(ids: Sequence[int], bins: int, width: float, weight: float = 1.0) -> Block:
    """Conjunction of worker identity and a standoff bin."""
    return Block("who_standoff", max(1, len(ids)) * bins, weight, (tuple(ids), bins, float(width)))


def _fill(b: Block, frame: Any, ctx: Mapping[str, Any]) -> np.ndarray:
    v = np.zeros(b.size)
    if b.kind == "rays":
        r = np.asarray(frame.proximity, dtype=float)
        if r.shape != (b.size,):
            raise LayoutError(f"layout expects {b.size} rays, frame has {r.shape[0]}")
        v[:] = r / b.params[0]
    elif b.kind == "cues":
        ids, nb, fov = b.params
        index = {c: i for i, c in enumerate(ids)}
        for cid, bearing, _rng in frame.cues:
            i = index.get(cid)
            if i is None:
                continue
            k = min(nb - 1, max(0, int((bearing + fov / 2) / fov * nb)))
            v[i * nb + k] = 1.0
    elif b.kind == "worker":
        (ids,) = b.params
        who = ctx.get("who")
        if who is None:
            who = nearest_worker(frame, ids)
        if who is not None and who in ids:
            v[ids.index(who)] = 1.0
    elif b.kind == "endo":
        (keys,) = b.params
        for i, k in enumerate(keys):
            v[i] = float(frame.endosensing.get(k, 0.0))
    elif b.kind == "place":
        cell, nx, ny = b.params
        pose = ctx.get("pose")
        if pose is not None:
            cx = min(nx - 1, max(0, int(pose[0] // cell)))
            cy = min(ny - 1, max(0, int(pose[1] // cell)))
            v[cy * nx + cx] = 1.0
    elif b.kind == "goal":
        (goals,) = b.params
        g = ctx.get("goal")
        if g in goals:
            v[goals.index(g)] = 1.0
    elif b.kind == "model":
        (models,) = b.params
        wp = getattr(frame, "workpiece", None)
        if wp is not None and wp[0] in models:
            v[models.index(wp[0])] = 1.0
    elif b.kind == "progress":
        (n,) = b.params
        wp = getattr(frame, "workpiece", None)
        if wp is not None:
            v[sum(1 << c for c in wp[1] if 0 <= c < n)] = 1.0
    elif b.kind == "standoff":
        (top,) = b.params
        s = ctx.get("standoff")
        if s is not None:
            v[min(b.size - 1, max(0, int(s / top * b.size)))] = 1.0
    elif b.kind == "who_standoff":
        ids, nbins, width = b.params
        who = ctx.get("who")
        if who is None:
            who = nearest_worker(frame, ids)
        s = ctx.get("standoff")
        if who in ids and s is not None:
            v[ids.index(who) * nbins + min(nbins - 1, max(0, int(s / width)))] = 1.0
    else:
        raise LayoutError(f"unknown block kind {b.kind!r}")
    return v


def nearest_worker(frame: Any, ids: Sequence[int]) -> int | None:
    """Worker cue with the smallest range; ties go to the lower cue id."""
    best = None
    for cid, _b, rng in frame.cues:
        if cid in ids and (best is None or (rng, cid) < best):
            best = (rng, cid)
    return None if best is None else best[1]


def prototype_encode(frame: Any, layout: Layout, ctx: Mapping[str, Any] | None = None) -> np.ndarray:
    ctx = ctx or {}
    parts = []
    for b in layout.blocks:
        v = _fill(b, frame, ctx)
        parts.append(normalize(v) * b.weight)
    out = np.concatenate(parts) if parts else np.zeros(0)
    return normalize(out)
