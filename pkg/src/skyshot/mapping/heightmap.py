"""2D terrain height map accumulated from sensor hits.

Each cell keeps a running mean of the heights of the hits that landed in it;
untouched cells read the default height (0 m, the takeoff reference).
"""

from __future__ import annotations

import numpy as np


class HeightMap:
    def __init__(self, dims, origin=(0.0, 0.0), cell_size: float = 1.0,
                 default_height: float = 0.0):
        self.dims = (int(dims[0]), int(dims[1]))
        self.origin = np.asarray(origin, dtype=float).reshape(2).copy()
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.cell_size = float(cell_size)
        self.default_height = float(default_height)
        self.means = np.full(self.dims, self.default_height, dtype=float)
        self.counts = np.zeros(self.dims, dtype=np.int64)
        self.ignored = 0

    def cell_of(self, xy) -> np.ndarray:
        pts = np.asarray(xy, dtype=float)
        return np.floor((pts - self.origin) / self.cell_size).astype(np.int64)

    def in_bounds(self, xy) -> np.ndarray:
        cell = self.cell_of(xy)
        dims = np.array(self.dims)
        return np.all((cell >= 0) & (cell < dims), axis=-1)

    def add_hit(self, point) -> None:
        """Fold one hit into its cell's running mean; out-of-bounds counted."""
        p = np.asarray(point, dtype=float).reshape(3)
        cell = self.cell_of(p[:2])
        if not (0 <= cell[0] < self.dims[0] and 0 <= cell[1] < self.dims[1]):
            self.ignored += 1
            return
        i, j = int(cell[0]), int(cell[1])
        if self.counts[i, j] == 0:
            self.means[i, j] = 0.0
        self.counts[i, j] += 1
        self.means[i, j] += (p[2] - self.means[i, j]) / self.counts[i, j]

    def add_hits(self, points) -> None:
        for p in np.atleast_2d(np.asarray(points, dtype=float)):
            self.add_hit(p)

    def height_at(self, xy):
        """Mean height of the containing cell; default outside the map."""
        pts = np.asarray(xy, dtype=float)
        scalar = pts.ndim == 1
        p = np.atleast_2d(pts)
        cell = self.cell_of(p)
        dims = np.array(self.dims)
        ok = np.all((cell >= 0) & (cell < dims), axis=-1)
        out = np.full(p.shape[0], self.default_height, dtype=float)
        if ok.any():
            c = cell[ok]
            out[ok] = self.means[c[:, 0], c[:, 1]]
        return float(out[0]) if scalar else out

    def set_heights(self, heights: np.ndarray) -> None:
        """Install a full height field (used by scenario generators)."""
        arr = np.asarray(heights, dtype=float)
        if arr.shape != self.dims:
            raise ValueError(f"heights must have shape {self.dims}, got {arr.shape}")
        self.means = arr.copy()
        self.counts = np.ones(self.dims, dtype=np.int64)
