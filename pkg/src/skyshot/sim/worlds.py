"""Deterministic synthetic worlds.

Ground-truth worlds mimic the steady state of a mapped scene: obstacle
shells are occupied, interiors stay unknown (a sensor never sees them), and
everything else is free.  The border set is then exactly the shell, and the
paired distance field is built from it in one shot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from skyshot.mapping.grid import GridSpec, OccupancyGrid
from skyshot.mapping.heightmap import HeightMap
from skyshot.mapping.sdf import SignedDistanceField
from skyshot.seeding import rng_for


@dataclass
class World:
    """Ground truth maps plus generator metadata."""

    grid: OccupancyGrid
    sdf: SignedDistanceField
    hm: HeightMap
    meta: dict


def _voxel_centers(spec: GridSpec):
    axes = [
        spec.origin[i] + (np.arange(spec.dims[i]) + 0.5) * spec.voxel_size
        for i in range(3)
    ]
    return np.meshgrid(*axes, indexing="ij")


def _fill_shell_world(spec: GridSpec, solid: np.ndarray) -> OccupancyGrid:
    """free outside, occupied shell, unknown interior."""
    grid = OccupancyGrid(spec)
    free = ~solid
    shell = np.zeros(spec.dims, dtype=bool)
    for ax in range(3):
        src = [slice(None)] * 3
        dst = [slice(None)] * 3
        src[ax] = slice(1, None)
        dst[ax] = slice(None, -1)
        shell[tuple(dst)] |= solid[tuple(dst)] & free[tuple(src)]
        shell[tuple(src)] |= solid[tuple(src)] & free[tuple(dst)]
    # solid faces on the grid boundary also count as shell
    for ax in range(3):
        first = [slice(None)] * 3
        last = [slice(None)] * 3
        first[ax] = 0
        last[ax] = spec.dims[ax] - 1
        shell[tuple(first)] |= solid[tuple(first)]
        shell[tuple(last)] |= solid[tuple(last)]
    grid.values[free] = 0
    grid.values[solid] = 127
    grid.values[shell] = 255
    return grid


def _with_sdf(grid: OccupancyGrid, truncation: float) -> SignedDistanceField:
    sdf = SignedDistanceField(grid.spec, truncation=truncation)
    sdf.rebuild(grid)
    return sdf


def gen_sphere_world(
    count: int,
    seed: int,
    box: float = 50.0,
    height: float = 22.0,
    radius_range=(1.0, 4.0),
    center_z_range=(1.0, 8.0),
    center_x_range=None,
    corridor_half_width: float = 4.0,
    camera_track=None,
    truncation: float = 10.0,
    voxel_size: float = 1.0,
) -> World:
    """Randomized clutter: ``count`` disjoint spheres in a box, with the
    actor corridor (along y=0) kept clear.

    ``camera_track`` = (y, z, clear_radius) additionally keeps a tube along
    x clear, so the nominal camera orbit line itself stays flyable and the
    clutter blocks sight lines rather than the track.
    """
    half = box / 2.0
    spec = GridSpec(
        dims=(int(box / voxel_size), int(box / voxel_size), int(height / voxel_size)),
        origin=np.array([-half, -half, 0.0]),
        voxel_size=voxel_size,
    )
    rng = rng_for(seed, "sphere-world")
    spheres = []
    attempts = 0
    while len(spheres) < count:
        attempts += 1
        if attempts > 20000:
            raise RuntimeError(
                f"could not place {count} spheres in a {box} m box"
            )
        r = rng.uniform(*radius_range)
        margin = r + 1.0
        x_lo, x_hi = (
            center_x_range if center_x_range is not None
            else (-half + margin, half - margin)
        )
        c = rng.uniform(
            [x_lo, -half + margin, center_z_range[0]],
            [x_hi, half - margin, min(height - 2.0 - r, center_z_range[1])],
        )
        if abs(c[1]) < corridor_half_width + r:
            continue
        if camera_track is not None:
            ty, tz, tr = camera_track
            if math.hypot(c[1] - ty, c[2] - tz) < r + tr:
                continue
        if any(
            np.linalg.norm(c - oc) <= r + orad + 0.5 for oc, orad in spheres
        ):
            continue
        spheres.append((c, r))

    solid = np.zeros(spec.dims, dtype=bool)
    if spheres:
        xs, ys, zs = _voxel_centers(spec)
        for c, r in spheres:
            solid |= (xs - c[0]) ** 2 + (ys - c[1]) ** 2 + (zs - c[2]) ** 2 <= r * r
    grid = _fill_shell_world(spec, solid)
    hm = HeightMap(spec.dims[:2], origin=spec.origin[:2], cell_size=voxel_size)
    return World(
        grid=grid,
        sdf=_with_sdf(grid, truncation),
        hm=hm,
        meta={
            "kind": "spheres",
            "spheres": [(c.tolist(), float(r)) for c, r in spheres],
            "seed": seed,
        },
    )


@dataclass(frozen=True)
class BlockWorldParams:
    length: float = 70.0
    block_count: int = 6
    block_length: tuple = (8.0, 14.0)
    side_offset: tuple = (3.0, 6.0)
    width: tuple = (6.0, 10.0)
    heights: tuple = (3.0, 9.0)
    gap: tuple = (2.0, 6.0)


def _heightmap_world(
    spec: GridSpec, heights: np.ndarray, truncation: float, meta: dict
) -> World:
    xs, ys, zs = _voxel_centers(spec)
    solid = zs <= heights[:, :, None]
    grid = _fill_shell_world(spec, solid)
    hm = HeightMap(spec.dims[:2], origin=spec.origin[:2], cell_size=spec.voxel_size)
    hm.set_heights(heights)
    return World(grid=grid, sdf=_with_sdf(grid, truncation), hm=hm, meta=meta)


def gen_blockworld(params: BlockWorldParams | None, seed: int,
                   truncation: float = 10.0) -> World:
    """Alternating blocks left and right of a straight actor path (along +x
    at y = 0), with seeded heights, lengths, and gaps."""
    p = params or BlockWorldParams()
    rng = rng_for(seed, "blockworld")
    spec = GridSpec(
        dims=(int(p.length) + 20, 40, 16),
        origin=np.array([-10.0, -20.0, -1.0]),
        voxel_size=1.0,
    )
    heights = np.zeros(spec.dims[:2])
    blocks = []
    x = 4.0 + rng.uniform(0.0, 4.0)
    side = 1 if rng.random() < 0.5 else -1
    for _ in range(p.block_count):
        length = rng.uniform(*p.block_length)
        if x + length > p.length:
            break
        offset = rng.uniform(*p.side_offset)
        width = rng.uniform(*p.width)
        h = rng.uniform(*p.heights)
        y0 = offset if side > 0 else -(offset + width)
        blocks.append({"x": (x, x + length), "y": (y0, y0 + width), "h": h})
        x += length + rng.uniform(*p.gap)
        side = -side

    cell_x = spec.origin[0] + (np.arange(spec.dims[0]) + 0.5) * spec.voxel_size
    cell_y = spec.origin[1] + (np.arange(spec.dims[1]) + 0.5) * spec.voxel_size
    for blk in blocks:
        mx = (cell_x >= blk["x"][0]) & (cell_x < blk["x"][1])
        my = (cell_y >= blk["y"][0]) & (cell_y < blk["y"][1])
        region = np.outer(mx, my)
        heights[region] = np.maximum(heights[region], blk["h"])

    meta = {"kind": "blocks", "blocks": blocks, "seed": seed}
    return _heightmap_world(spec, heights, truncation, meta)


def gen_mound_world(seed: int = 0, mound_height: float = 8.0,
                    mound_sigma: float = 6.0, truncation: float = 10.0) -> World:
    """A single smooth mound astride the actor path (the horizon-study scene)."""
    rng = rng_for(seed, "mound-world")
    spec = GridSpec(
        dims=(70, 40, 16),
        origin=np.array([-10.0, -20.0, -1.0]),
        voxel_size=1.0,
    )
    cx = 25.0 + rng.uniform(-2.0, 2.0)
    cy = 0.0
    cell_x = spec.origin[0] + (np.arange(spec.dims[0]) + 0.5) * spec.voxel_size
    cell_y = spec.origin[1] + (np.arange(spec.dims[1]) + 0.5) * spec.voxel_size
    gx, gy = np.meshgrid(cell_x, cell_y, indexing="ij")
    heights = mound_height * np.exp(
        -((gx - cx) ** 2 + (gy - cy) ** 2) / (2.0 * mound_sigma**2)
    )
    heights[heights < 0.3] = 0.0
    meta = {"kind": "mound", "center": [cx, cy], "height": mound_height,
            "sigma": mound_sigma, "seed": seed}
    return _heightmap_world(spec, heights, truncation, meta)
