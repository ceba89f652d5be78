"""File formats for the mapping module: point-cloud ingestion and map dumps."""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

_FRAME_RECORD = struct.Struct("<fffI")


def read_points_csv(path) -> tuple:
    """Read ``x,y,z,is_hit`` lines; returns (points (N,3), hits (N,) bool)."""
    points, hits = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            x, y, z, flag = row[:4]
            points.append((float(x), float(y), float(z)))
            hits.append(bool(int(flag)))
    return np.array(points, dtype=float).reshape(-1, 3), np.array(hits, dtype=bool)


def write_points_csv(path, points, hits) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for p, h in zip(np.asarray(points, dtype=float), np.asarray(hits)):
            writer.writerow([repr(float(p[0])), repr(float(p[1])),
                             repr(float(p[2])), int(bool(h))])


def read_points_bin(path) -> tuple:
    """Binary frame: little-endian uint32 count, then 16-byte records
    (float32 x, y, z, uint32 is_hit)."""
    data = Path(path).read_bytes()
    (count,) = struct.unpack_from("<I", data, 0)
    expected = 4 + count * _FRAME_RECORD.size
    if len(data) < expected:
        raise ValueError(f"frame truncated: need {expected} bytes, have {len(data)}")
    points = np.empty((count, 3), dtype=float)
    hits = np.empty(count, dtype=bool)
    for i in range(count):
        x, y, z, flag = _FRAME_RECORD.unpack_from(data, 4 + i * _FRAME_RECORD.size)
        points[i] = (x, y, z)
        hits[i] = bool(flag)
    return points, hits


def write_points_bin(path, points, hits) -> None:
    points = np.asarray(points, dtype=float)
    hits = np.asarray(hits)
    chunks = [struct.pack("<I", len(points))]
    for p, h in zip(points, hits):
        chunks.append(_FRAME_RECORD.pack(float(p[0]), float(p[1]), float(p[2]),
                                         1 if h else 0))
    Path(path).write_bytes(b"".join(chunks))


def write_grid_csv(path, array2d) -> None:
    """Dump a 2D float array as CSV rows (x-major)."""
    arr = np.asarray(array2d)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in arr:
            writer.writerow([repr(float(v)) for v in row])


def write_pgm(path, array2d, lo=None, hi=None) -> None:
    """Dump a 2D array as a binary 8-bit PGM, scaled from [lo, hi]."""
    arr = np.asarray(array2d, dtype=float)
    lo = float(arr.min()) if lo is None else float(lo)
    hi = float(arr.max()) if hi is None else float(hi)
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((arr - lo) / span * 255.0, 0, 255).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + scaled.tobytes())
