"""Integer 3D digital differential analyzer over voxel indices.

One traversal is shared by the grid ray update and the line-of-sight query so
that corner-grazing behavior is decided in exactly one place.  The walk is a
3D Bresenham: the dominant axis advances every step; a minor axis advances
when its doubled error term exceeds the dominant span (a tie keeps the minor
coordinate, i.e. the midpoint rounds toward the current cell).
"""

from __future__ import annotations

import numpy as np


def voxel_line(start, end) -> np.ndarray:
    """All voxel indices visited between two index triples, inclusive.

    Returns an (N, 3) int array beginning at ``start`` and ending at ``end``.
    Visits exactly max(|delta|) + 1 voxels.
    """
    a = np.asarray(start, dtype=np.int64).reshape(3)
    b = np.asarray(end, dtype=np.int64).reshape(3)
    delta = np.abs(b - a)
    step = np.sign(b - a)

    drive = int(np.argmax(delta))
    n = int(delta[drive])
    if n == 0:
        return a.reshape(1, 3).copy()
    o1, o2 = (ax for ax in (0, 1, 2) if ax != drive)

    out = np.empty((n + 1, 3), dtype=np.int64)
    cur = a.copy()
    out[0] = cur
    err1 = 2 * delta[o1] - n
    err2 = 2 * delta[o2] - n
    for k in range(1, n + 1):
        cur[drive] += step[drive]
        if err1 > 0:
            cur[o1] += step[o1]
            err1 -= 2 * n
        if err2 > 0:
            cur[o2] += step[o2]
            err2 -= 2 * n
        err1 += 2 * delta[o1]
        err2 += 2 * delta[o2]
        out[k] = cur
    return out


def clip_segment(p0, p1, lo, hi):
    """Clip a world-space segment to an axis-aligned box (Liang-Barsky).

    Returns (q0, q1, t0, t1) with q = p0 + t * (p1 - p0), or None when the
    segment misses the box entirely.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for ax in range(3):
        if d[ax] == 0.0:
            if p0[ax] < lo[ax] or p0[ax] > hi[ax]:
                return None
            continue
        ta = (lo[ax] - p0[ax]) / d[ax]
        tb = (hi[ax] - p0[ax]) / d[ax]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return None
    return p0 + t0 * d, p0 + t1 * d, t0, t1
