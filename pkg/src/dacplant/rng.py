"""Seeded random streams, one per (run seed, entity id).

Streams are derived by hashing so adding an entity never shifts another
entity's draws.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, entity: str) -> int:
    h = hashlib.blake2b(f"{int(seed)}/{entity}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, entity: str) -> random.Random:
    """64-bit derived seed feeding a per-entity generator."""
    return random.Random(derive_seed(seed, entity))
