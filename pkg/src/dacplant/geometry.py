"""Planar geometry kernels: angle wrapping, ray casts, swept-circle contact times.

All batch routines take segment endpoint arrays ``A`` and ``B`` of shape (S, 2).
"""

from __future__ import annotations

import math

import numpy as np

TAU = 2.0 * math.pi
_EPS = 1e-12


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi); values already in range are returned unchanged."""
    if -math.pi <= a < math.pi:
        return a
    a = (a + math.pi) % TAU - math.pi
    if a >= math.pi:  # float edge case of the modulo
        a -= TAU
    return a


def rect_segments(x0: float, y0: float, x1: float, y1: float) -> list[tuple[float, float, float, float]]:
    return [(x0, y0, x1, y0), (x1, y0, x1, y1), (x1, y1, x0, y1), (x0, y1, x0, y0)]


def ray_cast(origin, angles: np.ndarray, A: np.ndarray, B: np.ndarray,
             centers: np.ndarray, radii: np.ndarray, max_range: float) -> np.ndarray:
    """Distance along each ray to the first segment or circle hit, clamped to max_range."""
    ox, oy = origin
    dx = np.cos(angles)[:, None]
    dy = np.sin(angles)[:, None]
    out = np.full(len(angles), max_range)
    if len(A):
        ex = (B[:, 0] - A[:, 0])[None, :]
        ey = (B[:, 1] - A[:, 1])[None, :]
        wx = (A[:, 0] - ox)[None, :]
        wy = (A[:, 1] - oy)[None, :]
        den = dx * ey - dy * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (wx * ey - wy * ex) / den
            s = (wx * dy - wy * dx) / den
        ok = (np.abs(den) > _EPS) & (t >= 0.0) & (s >= 0.0) & (s <= 1.0)
        t = np.where(ok, t, np.inf)
        out = np.minimum(out, t.min(axis=1))
    if len(centers):
        cx = (centers[:, 0] - ox)[None, :]
        cy = (centers[:, 1] - oy)[None, :]
        proj = cx * dx + cy * dy
        perp2 = cx * cx + cy * cy - proj * proj
        r2 = (radii * radii)[None, :]
        with np.errstate(invalid="ignore"):
            t = proj - np.sqrt(np.maximum(r2 - perp2, 0.0))
        ok = (perp2 <= r2) & (proj > 0.0)
        t = np.where(ok, np.maximum(t, 0.0), np.inf)
        out = np.minimum(out, t.min(axis=1))
    return np.minimum(out, max_range)


def occluded(origin, targets: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """True where the straight line origin->target crosses any segment strictly inside."""
    n = len(targets)
    if n == 0 or len(A) == 0:
        return np.zeros(n, dtype=bool)
    ox, oy = origin
    dx = (targets[:, 0] - ox)[:, None]
    dy = (targets[:, 1] - oy)[:, None]
    ex = (B[:, 0] - A[:, 0])[None, :]
    ey = (B[:, 1] - A[:, 1])[None, :]
    wx = (A[:, 0] - ox)[None, :]
    wy = (A[:, 1] - oy)[None, :]
    den = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (wx * ey - wy * ex) / den
        s = (wx * dy - wy * dx) / den
    hit = (np.abs(den) > _EPS) & (t > 1e-9) & (t < 1.0 - 1e-9) & (s >= 0.0) & (s <= 1.0)
    return hit.any(axis=1)


def sweep_circle_segments(p, d, r: float, A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> float:
    """Earliest fraction tau in [0, 1] at which a circle moving p -> p + d touches a segment.

    Returns ``inf`` when no contact happens within the step. A circle already in
    contact that moves further in returns 0; moving away or tangentially is free.
    """
    if len(A) == 0:
        return math.inf
    px, py = p
    ddx, ddy = d
    if ddx == 0.0 and ddy == 0.0:
        return math.inf
    ex = B[:, 0] - A[:, 0]
    ey = B[:, 1] - A[:, 1]
    L = np.sqrt(ex * ex + ey * ey)
    ux, uy = ex / L, ey / L
    nx, ny = -uy, ux
    # side faces
    h = (px - A[:, 0]) * nx + (py - A[:, 1]) * ny
    dn = ddx * nx + ddy * ny
    sgn = np.where(h >= 0.0, 1.0, -1.0)
    ha = h * sgn
    dna = dn * sgn
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tau_line = np.where(dna < 0.0, (ha - r) / (-dna), np.inf)
    tau_line = np.where((ha >= r - 1e-7) | (dna >= 0.0), tau_line, np.inf)
    tau_line = np.maximum(tau_line, 0.0)
    fin = np.where(np.isfinite(tau_line), tau_line, 0.0)
    cx = px + fin * ddx
    cy = py + fin * ddy
    along = (cx - A[:, 0]) * ux + (cy - A[:, 1]) * uy
    tau_line = np.where((along >= 0.0) & (along <= L) & np.isfinite(tau_line), tau_line, np.inf)
    best = float(tau_line.min())
    # end caps
    for E in (A, B):
        qx = px - E[:, 0]
        qy = py - E[:, 1]
        a = ddx * ddx + ddy * ddy
        b = 2.0 * (qx * ddx + qy * ddy)
        c = qx * qx + qy * qy - r * r
        disc = b * b - 4.0 * a * c
        with np.errstate(invalid="ignore"):
            tau = (-b - np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a)
        tau = np.where((disc >= 0.0) & (b < 0.0), tau, np.inf)
        tau = np.where(c <= tol, np.where(b < 0.0, 0.0, np.inf), tau)
        tau = np.where(tau < 0.0, 0.0, tau)
        best = min(best, float(tau.min()))
    return best if best <= 1.0 else math.inf


def sweep_circle_circle(p1, d1, r1: float, p2, d2, r2: float, tol: float = 1e-9) -> float:
    """Earliest tau in [0, 1] at which two linearly moving circles touch."""
    px = p1[0] - p2[0]
    py = p1[1] - p2[1]
    dx = d1[0] - d2[0]
    dy = d1[1] - d2[1]
    R = r1 + r2
    a = dx * dx + dy * dy
    b = 2.0 * (px * dx + py * dy)
    c = px * px + py * py - R * R
    if c <= tol:
        return 0.0 if b < 0.0 else math.inf
    if a == 0.0 or b >= 0.0:
        return math.inf
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return math.inf
    tau = (-b - math.sqrt(disc)) / (2.0 * a)
    return tau if 0.0 <= tau <= 1.0 else math.inf


def point_in_rect(x: float, y: float, rect) -> bool:
    x0, y0, x1, y1 = rect
    return x0 <= x <= x1 and y0 <= y <= y1


def cells_on_line(x0: float, y0: float, x1: float, y1: float, cell: float) -> list[tuple[int, int]]:
    """Grid cells touched by a straight segment (sampled at quarter-cell spacing)."""
    n = max(1, int(math.hypot(x1 - x0, y1 - y0) / (cell * 0.25)))
    seen: list[tuple[int, int]] = []
    for k in range(n + 1):
        f = k / n
        c = (int((x0 + f * (x1 - x0)) // cell), int((y0 + f * (y1 - y0)) // cell))
        if not seen or seen[-1] != c:
            if c not in seen:
                seen.append(c)
    return seen


def point_segment_distance(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    ex, ey = bx - ax, by - ay
    L2 = ex * ex + ey * ey
    f = 0.0 if L2 == 0.0 else max(0.0, min(1.0, ((px - ax) * ex + (py - ay) * ey) / L2))
    return math.hypot(ax + f * ex - px, ay + f * ey - py)


def sweep_circle_segment_list(p, d, r: float, segs: list[tuple[float, float, float, float]]) -> float:
    """Scalar version of sweep_circle_segments with a distance broad phase."""
    px, py = p
    dx, dy = d
    reach = r + math.hypot(dx, dy) + 1e-9
    near = [s for s in segs if point_segment_distance(px, py, *s) <= reach]
    if not near:
        return math.inf
    arr = np.array(near, dtype=float)
    return sweep_circle_segments(p, d, r, arr[:, :2], arr[:, 2:])
