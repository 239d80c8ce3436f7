"""Paired-condition statistics: exact two-sided sign test over seeds."""

from __future__ import annotations

import math
from dataclasses import dataclass

MIN_PAIRS = 5


@dataclass
class SignTest:
    wins: int
    losses: int
    ties: int
    p_value: float
    flagged: bool  # fewer than MIN_PAIRS non-tied pairs: the test is not meaningful

    @property
    def n(self) -> int:
        return self.wins + self.losses + self.ties

    @property
    def n_effective(self) -> int:
        return self.wins + self.losses

    @property
    def win_fraction(self) -> float:
        """Strict wins over all pairs (ties count against)."""
        return self.wins / self.n if self.n else 0.0

    @property
    def at_least_fraction(self) -> float:
        """Wins plus ties over all pairs."""
        return (self.wins + self.ties) / self.n if self.n else 0.0


def binom_two_sided(k: int, n: int) -> float:
    """Exact two-sided p-value of k successes in n fair trials (doubled smaller tail, capped at 1)."""
    if n == 0:
        return 1.0
    lo = min(k, n - k)
    tail = sum(math.comb(n, i) for i in range(lo + 1)) / 2.0 ** n
    return min(1.0, 2.0 * tail)


def sign_test(a, b, higher_is_better: bool = True) -> SignTest:
    """Compare paired values a[i] vs b[i]; a 'win' means a is better. Ties are dropped from the test."""
    if len(a) != len(b):
        raise ValueError(f"unpaired samples ({len(a)} vs {len(b)})")
    wins = losses = ties = 0
    for x, y in zip(a, b):
        if x == y:
            ties += 1
        elif (x > y) == higher_is_better:
            wins += 1
        else:
            losses += 1
    n_eff = wins + losses
    return SignTest(wins, losses, ties, binom_two_sided(wins, n_eff), n_eff < MIN_PAIRS)
