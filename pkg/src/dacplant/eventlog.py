"""Append-only JSON-lines event log with a versioned header and an end marker."""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Any, Iterable

LOG_FORMAT = "dacplant-log"
LOG_VERSION = 3


class LogError(ValueError):
    pass


class VersionError(LogError):
    def __init__(self, found, expected):
        self.found, self.expected = found, expected
        super().__init__(f"log version {found} is not supported by this build (expected {expected})")


class TruncatedLog(LogError):
    def __init__(self, last_tick: int):
        self.last_tick = last_tick
        super().__init__(f"log is truncated; last valid tick {last_tick}")


def dumps(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"), allow_nan=False)


class EventLog:
    """Records are kept in memory and optionally streamed to a file as they are appended."""

    def __init__(self, header: dict[str, Any], path: str | Path | None = None, keep: bool = True):
        self.records: list[dict] = []
        self.keep = keep
        self._fh: io.TextIOBase | None = open(path, "w", encoding="utf-8") if path else None
        self.last_tick = -1
        self.append(dict(header, type="header", format=LOG_FORMAT, version=LOG_VERSION))

    def append(self, rec: dict) -> None:
        t = rec.get("t")
        if t is not None:
            if t < self.last_tick:
                raise LogError(f"tick went backwards ({t} < {self.last_tick})")
            self.last_tick = t
        if self.keep:
            self.records.append(rec)
        if self._fh is not None:
            self._fh.write(dumps(rec) + "\n")

    def close(self, ticks: int) -> None:
        self.append({"type": "end", "ticks": ticks})
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def parse(lines: Iterable[str]) -> list[dict]:
    """Decode and validate a serialized log. Refuses other versions and truncated logs."""
    recs: list[dict] = []
    last = -1
    for n, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            raise TruncatedLog(last) from None
        if n == 0:
            if rec.get("type") != "header" or rec.get("format") != LOG_FORMAT:
                raise LogError("missing log header")
            if rec.get("version") != LOG_VERSION:
                raise VersionError(rec.get("version"), LOG_VERSION)
        if "t" in rec:
            last = rec["t"]
        recs.append(rec)
    if not recs:
        raise LogError("empty log (no header)")
    if recs[-1].get("type") != "end":
        raise TruncatedLog(last)
    return recs


def read(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return parse(fh)
