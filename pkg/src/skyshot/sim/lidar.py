"""Synthetic spinning LiDAR against a ground-truth grid.

Each ray walks the voxel line toward its max-range endpoint; the first
occupied voxel turns the ray into a hit at that voxel's center (range
quantized to the grid), otherwise the ray is a miss at max range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from skyshot.mapping.grid import OccupancyGrid
from skyshot.mapping.traversal import clip_segment, voxel_line


@dataclass(frozen=True)
class ScanPattern:
    rings: int = 8
    rays_per_ring: int = 120
    vfov_deg: tuple = (-15.0, 15.0)
    max_range: float = 50.0

    def directions(self) -> np.ndarray:
        elevations = np.linspace(
            math.radians(self.vfov_deg[0]),
            math.radians(self.vfov_deg[1]),
            self.rings,
        )
        azimuths = np.arange(self.rays_per_ring) * (2.0 * math.pi / self.rays_per_ring)
        az, el = np.meshgrid(azimuths, elevations)
        az = az.ravel()
        el = el.ravel()
        return np.stack(
            [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1
        )


def simulate_lidar(grid: OccupancyGrid, position, pattern: ScanPattern):
    """Cast the pattern from ``position``; returns (points (N,3), hits (N,))."""
    spec = grid.spec
    pos = np.asarray(position, dtype=float)
    directions = pattern.directions()
    points = np.empty_like(directions)
    hits = np.zeros(len(directions), dtype=bool)
    for i, d in enumerate(directions):
        end = pos + d * pattern.max_range
        points[i] = end
        clipped = clip_segment(pos, end, spec.origin, spec.upper)
        if clipped is None:
            continue
        q0, q1, _, _ = clipped
        cells = voxel_line(
            spec.clamp_voxel(spec.world_to_voxel(q0)),
            spec.clamp_voxel(spec.world_to_voxel(q1)),
        )
        vals = grid.values[cells[:, 0], cells[:, 1], cells[:, 2]]
        occ = vals >= spec.t_occ
        if occ.any():
            first = int(np.argmax(occ))
            points[i] = spec.voxel_center(cells[first])
            hits[i] = True
    return points, hits
