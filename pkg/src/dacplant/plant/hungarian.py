"""Minimum-cost one-to-one assignment (Hungarian method, O(n^3) potentials form).

Rectangular matrices are padded with zero-cost dummy rows or columns. Among
equal-cost optima the lexicographically smallest (row, column) pairing is
returned: rows are fixed in order, each to the lowest column that still
admits an optimal completion.
"""

from __future__ import annotations

import math

import numpy as np


def _solve_square(C: np.ndarray) -> list[int]:
    """Row -> column for a square cost matrix (Jonker-style shortest augmenting paths)."""
    n = C.shape[0]
    INF = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row matched to column j (1-based), 0 = free
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta, j1 = INF, 0
            row = C[i0 - 1]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta, j1 = minv[j], j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    out = [0] * n
    for j in range(1, n + 1):
        if p[j]:
            out[p[j] - 1] = j - 1
    return out


def _optimum(C: np.ndarray) -> float:
    if C.shape[0] == 0:
        return 0.0
    a = _solve_square(C)
    return float(sum(C[i, a[i]] for i in range(len(a))))


def _lex_first(C: np.ndarray, best: float, tol: float) -> list[int]:
    """Lexicographically smallest optimal row -> column map."""
    n = C.shape[0]
    rows, cols = list(range(n)), list(range(n))
    out = [0] * n
    spent = 0.0
    for i in range(n):
        rest_rows = rows[1:]
        for j in cols:
            rest_cols = [c for c in cols if c != j]
            sub = C[np.ix_(rest_rows, rest_cols)]
            if spent + C[i, j] + _optimum(sub) <= best + tol:
                out[i] = j
                spent += C[i, j]
                cols = rest_cols
                break
        rows = rest_rows
    return out


def hungarian(cost) -> list[tuple[int, int]]:
    """Optimal (row, col) pairs covering min(rows, cols) rows/columns, sorted by row."""
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.size == 0:
        return []
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix must be finite")
    r, c = C.shape
    n = max(r, c)
    S = np.zeros((n, n))
    S[:r, :c] = C
    assign = _solve_square(S)
    best = float(sum(S[i, assign[i]] for i in range(n)))
    scale = max(1.0, float(np.abs(C).max()))
    assign = _lex_first(S, best, 1e-9 * scale * n)
    return [(i, assign[i]) for i in range(r) if assign[i] < c]


def assignment_cost(cost, pairs) -> float:
    C = np.asarray(cost, dtype=float)
    return float(sum(C[i, j] for i, j in pairs))
