"""Contextual layer: short-term segment buffer, long-term sequence store, recall with chaining."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from ..actions import Action

DUP_COS = 0.99


class MergeError(ValueError):
    pass


@dataclass(frozen=True)
class H5W:
    who: Any = None
    what: Any = None
    where: Any = None
    when: int = 0
    why: Any = None
    how: dict | None = None

    def to_dict(self) -> dict:
        return {"who": self.who, "what": self.what, "where": self.where, "when": self.when,
                "why": self.why, "how": self.how}

    @classmethod
    def from_dict(cls, d: dict) -> "H5W":
        return cls(**d)


@dataclass
class Segment:
    prototype: np.ndarray
    action: Action
    h5w: H5W = field(default_factory=H5W)
    origin: tuple = ("", 0)


@dataclass
class Sequence:
    segments: list[Segment]
    goal: str
    value: float
    uses: int = 0
    origin: tuple = ("", 0, 0)
    last_used: int = 0

    def dim(self) -> int:
        return int(self.segments[0].prototype.shape[0]) if self.segments else 0


def is_duplicate(a: Sequence, b: Sequence, thresh: float = DUP_COS) -> bool:
    if a.goal != b.goal or len(a.segments) != len(b.segments):
        return False
    return all(float(x.prototype @ y.prototype) >= thresh for x, y in zip(a.segments, b.segments))


class STM:
    """Bounded FIFO of the most recent segments."""

    def __init__(self, capacity: int = 50):
        self.buf: deque[Segment] = deque(maxlen=capacity)

    def push(self, seg: Segment) -> None:
        self.buf.append(seg)

    def __len__(self) -> int:
        return len(self.buf)

    def clear(self) -> None:
        self.buf.clear()

    def segments(self) -> list[Segment]:
        return list(self.buf)


@dataclass
class LTMParams:
    capacity: int = 200
    gamma: float = 0.9
    beta: float = 1.5
    lam: float = 0.95
    p_max: float = 4.0
    theta: float = 0.5
    recency: float = 0.999  # per-tick factor used for eviction scores
    value_rate: float = 0.5  # how far a duplicate's value moves toward the new reward


class LTM:
    """Sequence store. Primes decay lazily: p(t) = 1 + excess * lam**(t - stamp)."""

    def __init__(self, params: LTMParams | None = None, dim: int | None = None):
        self.p = params or LTMParams()
        self.dim = dim
        self.sequences: list[Sequence] = []
        self._serial = 0
        self._dirty = True
        self._excess: dict[tuple, tuple[float, int]] = {}  # (seq origin, seg idx) -> (excess, stamp)
        self._ex_arrays = None
        self._cache = None  # (proto id, t, scores over all segments)
        self._utility: dict | None = None

    # -- bookkeeping ---------------------------------------------------------
    def __len__(self) -> int:
        return len(self.sequences)

    def _touch(self) -> None:
        self._utility = None
        self._dirty = True
        self._ex_arrays = None
        self._cache = None

    def _build(self) -> None:
        P, val, gp, seq_i, seg_i, goals = [], [], [], [], [], []
        for si, s in enumerate(self.sequences):
            n = len(s.segments)
            for j, seg in enumerate(s.segments):
                P.append(seg.prototype)
                val.append(s.value)
                gp.append(self.p.gamma ** (n - 1 - j))
                seq_i.append(si)
                seg_i.append(j)
                goals.append(s.goal)
        d = self.dim or 0
        self._P = np.array(P) if P else np.zeros((0, d))
        self._static = np.array(val) * np.array(gp) if P else np.zeros(0)
        self._seq = np.array(seq_i, dtype=int)
        self._seg = np.array(seg_i, dtype=int)
        self._goal_idx: dict[Any, np.ndarray] = {}
        ga = np.array(goals, dtype=object)
        for g in dict.fromkeys(goals):
            self._goal_idx[g] = np.nonzero(ga == g)[0]
        self._all_idx = np.arange(len(P))
        self._pos = {(self.sequences[a].origin, int(b)): i for i, (a, b) in enumerate(zip(seq_i, seg_i))}
        self._dirty = False

    def prime(self, si: int, j: int, t: int) -> float:
        e = self._excess.get((self.sequences[si].origin, j))
        if e is None:
            return 1.0
        return 1.0 + e[0] * self.p.lam ** max(0, t - e[1])

    def _primes(self, idx: np.ndarray, t: int) -> np.ndarray:
        if not self._excess:
            return np.ones(len(idx))
        if self._ex_arrays is None:
            keys = list(self._excess)
            gi = np.array([self._pos.get(k, -1) for k in keys], dtype=int)
            e = np.array([self._excess[k][0] for k in keys])
            st = np.array([self._excess[k][1] for k in keys], dtype=float)
            self._ex_arrays = (keys, gi, e, st)
        keys, gi, e, st = self._ex_arrays
        cur = e * self.p.lam ** np.maximum(0.0, t - st)
        stale = cur < 1e-9
        if stale.any():
            for k in np.nonzero(stale)[0]:
                del self._excess[keys[int(k)]]
            self._ex_arrays = None
        full = np.ones(len(self._seq))
        ok = (~stale) & (gi >= 0)
        full[gi[ok]] = 1.0 + cur[ok]
        return full[idx]

    def _check_dim(self, proto: np.ndarray) -> None:
        if self.dim is None:
            self.dim = int(proto.shape[0])
        elif proto.shape[0] != self.dim:
            raise MergeError(f"prototype dimension {proto.shape[0]} != memory dimension {self.dim}")

    # -- recall ---------------------------------------------------------------
    def scores(self, proto: np.ndarray, goal: Any, t: int) -> tuple[np.ndarray, np.ndarray]:
        if self._dirty:
            self._build()
        idx = self._goal_idx.get(goal) if goal is not None else self._all_idx
        if idx is None or len(idx) == 0:
            return np.zeros(0, dtype=int), np.zeros(0)
        c = self._cache
        if c is None or c[0] is not proto or c[1] != t:
            full = (self._P @ proto) * self._static * self._primes(self._all_idx, t)
            self._cache = c = (proto, t, full)
        return idx, c[2][idx]

    def goal_utility(self) -> dict[Any, float]:
        """Per goal, the discounted value of its best remembered plan (value * gamma^(length - 1))."""
        if self._utility is None:
            u: dict[Any, float] = {}
            for s in self.sequences:
                v = s.value * self.p.gamma ** (len(s.segments) - 1)
                if v > u.get(s.goal, 0.0):
                    u[s.goal] = v
            self._utility = u
        return self._utility

    def best_by_goal(self, proto: np.ndarray, t: int) -> dict[Any, float]:
        """Highest recall score per goal without side effects (a confidence peek)."""
        if not self.sequences or not proto.any():
            return {}
        idx, sc = self.scores(proto, None, t)
        return {g: float(sc[gi].max()) for g, gi in self._goal_idx.items()}

    def select(self, proto: np.ndarray, goal: Any, t: int, commit: bool = True):
        """Best (action, confidence, (seq, seg)) if its score reaches theta; chains on commit."""
        if not self.sequences or not proto.any():
            return None
        idx, sc = self.scores(proto, goal, t)
        if len(idx) == 0:
            return None
        k = int(np.argmax(sc))
        conf = float(sc[k])
        if conf < self.p.theta:
            return None
        gi = int(idx[k])
        si, j = int(self._seq[gi]), int(self._seg[gi])
        s = self.sequences[si]
        if commit:
            s.uses += 1
            s.last_used = t
            if j + 1 < len(s.segments):
                pj = self.prime(si, j, t)
                ps = self.prime(si, j + 1, t)
                new = min(self.p.p_max, max(ps, pj * self.p.beta))
                self._excess[(s.origin, j + 1)] = (new - 1.0, t)
                self._ex_arrays = None
                self._cache = None
        return s.segments[j].action, conf, (si, j)

    # -- storage --------------------------------------------------------------
    def _evict(self, now: int) -> None:
        while len(self.sequences) > self.p.capacity:
            def key(i):
                s = self.sequences[i]
                score = s.value * self.p.recency ** max(0, now - s.last_used)
                return (score, _neg_origin(s.origin))
            worst = min(range(len(self.sequences)), key=key)
            gone = self.sequences.pop(worst)
            self._drop_primes(gone.origin)
        self._touch()

    def _drop_primes(self, origin: tuple) -> None:
        for k in [k for k in self._excess if k[0] == origin]:
            del self._excess[k]
        self._ex_arrays = None
        self._cache = None

    def add(self, seq: Sequence, now: int | None = None) -> None:
        for seg in seq.segments:
            self._check_dim(seg.prototype)
        self.sequences.append(seq)
        self._touch()
        self._evict(seq.last_used if now is None else now)

    def consolidate(self, stm: STM, goal: str, r: float, t: int, agent: str,
                    rewrite: Callable[[Segment], Segment] | None = None) -> Sequence | None:
        """Copy STM into one new sequence with value r (or move a duplicate's value toward r)."""
        if not 0.0 <= r <= 1.0:
            raise ValueError("reward must be in [0, 1]")
        segs = stm.segments()
        stm.clear()
        if not segs:
            return None
        if rewrite is not None:
            segs = [rewrite(s) for s in segs]
        self._serial += 1
        new = Sequence(segs, goal, float(r), 0, (agent, int(t), self._serial), int(t))
        for s in self.sequences:
            if is_duplicate(s, new):
                s.value += self.p.value_rate * (r - s.value)
                s.last_used = int(t)
                self._touch()
                return s
        self.add(new, now=t)
        return new

    def merge(self, incoming: Iterable[Sequence], now: int = 0) -> int:
        """Merge sequences in place; returns the number of sequences gained."""
        before = {s.origin for s in self.sequences}
        merged = ltm_merge(self.sequences, list(incoming), self.dim)
        if merged and self.dim is None:
            self.dim = merged[0].dim()
        kept = {s.origin for s in merged}
        for o in before - kept:
            self._drop_primes(o)
        self.sequences = merged
        self._touch()
        self._evict(now)
        return len({s.origin for s in self.sequences} - before)

    def origins(self) -> set[tuple]:
        return {s.origin for s in self.sequences}


def _neg_origin(o: tuple) -> tuple:
    # larger origins are evicted first on equal score
    return tuple((-x if isinstance(x, (int, float)) else _Rev(x)) for x in o)


class _Rev:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    def __lt__(self, other):
        return self.v > other.v

    def __eq__(self, other):
        return self.v == other.v


def ltm_merge(a: list[Sequence], b: list[Sequence], dim: int | None = None) -> list[Sequence]:
    """Union keeping, among duplicates, the sequence with the smallest origin. Order independent."""
    for s in b:
        for seg in s.segments:
            if dim is not None and seg.prototype.shape[0] != dim:
                raise MergeError(f"incoming sequence {s.origin} has dimension "
                                 f"{seg.prototype.shape[0]}, expected {dim}")
    pool: dict[tuple, Sequence] = {}
    for s in list(a) + list(b):
        if s.origin not in pool:
            pool[s.origin] = s
    items = sorted(pool.values(), key=lambda s: s.origin)
    out = []
    for i, x in enumerate(items):
        if any(is_duplicate(x, y) for y in items[:i]):
            continue
        out.append(x)
    return out


def copy_sequence(s: Sequence) -> Sequence:
    segs = [Segment(seg.prototype.copy(), seg.action, seg.h5w, seg.origin) for seg in s.segments]
    return Sequence(segs, s.goal, s.value, s.uses, tuple(s.origin), s.last_used)
