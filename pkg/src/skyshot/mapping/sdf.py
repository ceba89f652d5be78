"""Incrementally maintained truncated signed distance transform.

The field stores, per voxel, the Euclidean distance (in meters, truncated at
``truncation``) to the nearest obstacle-border voxel together with that
border voxel's flat index.  The sign is not stored: queries read it from the
occupancy grid, positive in free space and negative in unknown or occupied
space.

Updates are driven by the border insert/remove candidates of a
:class:`~skyshot.mapping.grid.ChangeSet` and touch only the affected
neighborhoods:

* every candidate is reconciled against the grid's border predicate, which
  turns the candidate lists into exact insert/remove sets;
* an inserted border cell lowers the field across its truncation ball,
  carrying its own index as the nearest-border label (the vectorized
  closed form of an index-carrying lowering wavefront);
* voxels whose recorded nearest border was removed are raised and
  re-resolved against a KD-tree of the live border set, restoring the exact
  nearest distance.

Distances are always ``voxel_size * sqrt(integer index offsets)``, so the
incremental result is bit-identical to a from-scratch recomputation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from skyshot.mapping.grid import (
    CLASS_FREE,
    ChangeSet,
    GridSpec,
    OccupancyGrid,
    update_grid,
)

_ball_cache: dict = {}


def _ball_offsets(radius_vox: float):
    """Integer offsets (and their norms) with norm strictly below radius_vox."""
    key = round(radius_vox, 12)
    cached = _ball_cache.get(key)
    if cached is not None:
        return cached
    r = int(np.ceil(radius_vox))
    rng = np.arange(-r, r + 1)
    ox, oy, oz = np.meshgrid(rng, rng, rng, indexing="ij")
    offsets = np.stack([ox.ravel(), oy.ravel(), oz.ravel()], axis=1)
    norms = np.sqrt(np.sum(offsets.astype(float) ** 2, axis=1))
    keep = norms < radius_vox
    result = (offsets[keep], norms[keep])
    _ball_cache[key] = result
    return result


class SignedDistanceField:
    """Truncated distance-to-border magnitudes plus nearest-border labels."""

    def __init__(self, spec: GridSpec, truncation: float = 10.0):
        if truncation <= 0:
            raise ValueError("truncation must be positive")
        self.spec = spec
        self.truncation = float(truncation)
        self.magnitude = np.full(spec.dims, self.truncation, dtype=float)
        self.nearest = np.full(spec.dims, -1, dtype=np.int64)
        self.border = np.zeros(spec.dims, dtype=bool)
        self.version = 0

    # -- incremental update ------------------------------------------------

    def apply_changes(self, grid: OccupancyGrid, changes: ChangeSet) -> None:
        """Bring the field in line with the grid after a batch of ray updates."""
        if changes.is_empty():
            return
        spec = self.spec
        candidates = np.unique(
            np.asarray(changes.became_occ + changes.became_free, dtype=np.int64)
        )
        coords = spec.unflatten(candidates)
        truth = np.array([grid.is_border(c) for c in coords], dtype=bool)
        was = self.border.reshape(-1)[candidates]
        inserted = candidates[truth & ~was]
        removed = candidates[~truth & was]
        if inserted.size == 0 and removed.size == 0:
            return

        self.border.reshape(-1)[inserted] = True
        self.border.reshape(-1)[removed] = False

        if removed.size:
            self._raise_and_resolve(removed)
        if inserted.size:
            self._lower_from(inserted)
        self.version += 1

    def _raise_and_resolve(self, removed: np.ndarray) -> None:
        stale = np.isin(self.nearest, removed)
        if not stale.any():
            return
        stale_coords = np.argwhere(stale)
        border_coords = np.argwhere(self.border)
        flat_mag = self.magnitude.reshape(-1)
        flat_near = self.nearest.reshape(-1)
        stale_flat = self.spec.flatten(stale_coords)
        if border_coords.shape[0] == 0:
            flat_mag[stale_flat] = self.truncation
            flat_near[stale_flat] = -1
            return
        h = self.spec.voxel_size
        tree = cKDTree(border_coords.astype(float))
        dist_vox, nn = tree.query(
            stale_coords.astype(float),
            k=1,
            distance_upper_bound=self.truncation / h + 1e-9,
        )
        dist_m = dist_vox * h
        found = np.isfinite(dist_vox) & (dist_m < self.truncation)
        flat_mag[stale_flat] = np.where(found, dist_m, self.truncation)
        near_new = np.full(stale_flat.shape, -1, dtype=np.int64)
        if found.any():
            near_new[found] = self.spec.flatten(border_coords[nn[found]])
        flat_near[stale_flat] = near_new

    def _lower_from(self, inserted: np.ndarray) -> None:
        spec = self.spec
        h = spec.voxel_size
        offsets, norms = _ball_offsets(self.truncation / h)
        dims = np.array(spec.dims, dtype=np.int64)
        flat_mag = self.magnitude.reshape(-1)
        flat_near = self.nearest.reshape(-1)
        for src in inserted:
            center = spec.unflatten(src)
            pts = center + offsets
            ok = np.all((pts >= 0) & (pts < dims), axis=1)
            flat = spec.flatten(pts[ok])
            d = norms[ok] * h
            better = d < flat_mag[flat]
            flat_mag[flat[better]] = d[better]
            flat_near[flat[better]] = src

    # -- bulk construction ---------------------------------------------------

    def rebuild(self, grid: OccupancyGrid) -> None:
        """Recompute the whole field from the grid's current border set."""
        self.set_border_mask(grid.border_mask())

    def set_border_mask(self, border: np.ndarray) -> None:
        """Initialize the field from an explicit border mask (exact EDT)."""
        if border.shape != tuple(self.spec.dims):
            raise ValueError("border mask shape mismatch")
        self.border = border.astype(bool).copy()
        if not self.border.any():
            self.magnitude.fill(self.truncation)
            self.nearest.fill(-1)
            self.version += 1
            return
        dist_vox, idx = ndimage.distance_transform_edt(
            ~self.border, return_indices=True
        )
        dist_m = dist_vox * self.spec.voxel_size
        truncated = dist_m >= self.truncation
        self.magnitude = np.where(truncated, self.truncation, dist_m)
        nearest = np.ravel_multi_index((idx[0], idx[1], idx[2]), self.spec.dims)
        self.nearest = np.where(truncated, -1, nearest).astype(np.int64)
        self.version += 1

    def snapshot(self, grid: OccupancyGrid) -> "MapSnapshot":
        """Consistent copy for readers; never blocked by later updates."""
        return MapSnapshot(
            spec=self.spec,
            values=grid.values.copy(),
            magnitude=self.magnitude.copy(),
            truncation=self.truncation,
            version=self.version,
        )


@dataclass(frozen=True)
class MapSnapshot:
    """Frozen (occupancy, distance) view; duck-types both query arguments."""

    spec: GridSpec
    values: np.ndarray
    magnitude: np.ndarray
    truncation: float
    version: int

    def __post_init__(self):
        self.values.setflags(write=False)
        self.magnitude.setflags(write=False)


def ingest_scan(grid: OccupancyGrid, sdf: SignedDistanceField, sensor, points, hits):
    """Apply a batch of rays to the grid, then one distance-field update."""
    merged = ChangeSet()
    points = np.asarray(points, dtype=float)
    hits = np.asarray(hits, dtype=bool)
    for point, hit in zip(points, hits):
        merged.merge(update_grid(grid, sensor, point, bool(hit)))
    sdf.apply_changes(grid, merged)
    return merged


# -- queries -----------------------------------------------------------------


def _sign_multiplier(spec: GridSpec, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    idx = spec.clamp_voxel(spec.world_to_voxel(pts))
    vals = values[idx[..., 0], idx[..., 1], idx[..., 2]]
    return np.where(vals <= spec.t_free, 1.0, -1.0)


def _interpolate(sdf, grid, points, want_gradient: bool):
    """Trilinear magnitude (and optionally its in-cell gradient) with the
    containing voxel's class supplying the sign.

    Out-of-map points read +truncation with zero gradient; near the grid
    faces the sample coordinates are clamped, which zeroes the gradient
    along the clamped axis.
    """
    spec: GridSpec = grid.spec
    mag = sdf.magnitude
    trunc = sdf.truncation
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    value = np.full(n, trunc, dtype=float)
    grad = np.zeros((n, 3), dtype=float) if want_gradient else None

    inb = spec.in_bounds_point(pts)
    if np.any(inb):
        p = pts[inb]
        dims = np.array(spec.dims)
        g = (p - spec.origin) / spec.voxel_size - 0.5
        gc = np.clip(g, 0.0, dims - 1.0)
        unclamped = (g >= 0.0) & (g <= dims - 1.0)
        i0 = np.minimum(np.floor(gc).astype(np.int64), np.maximum(dims - 2, 0))
        f = gc - i0
        i1 = np.minimum(i0 + 1, dims - 1)

        def corner(ax, ay, az):
            ix = np.where(ax, i1[:, 0], i0[:, 0])
            iy = np.where(ay, i1[:, 1], i0[:, 1])
            iz = np.where(az, i1[:, 2], i0[:, 2])
            return mag[ix, iy, iz]

        c000, c100 = corner(0, 0, 0), corner(1, 0, 0)
        c010, c110 = corner(0, 1, 0), corner(1, 1, 0)
        c001, c101 = corner(0, 0, 1), corner(1, 0, 1)
        c011, c111 = corner(0, 1, 1), corner(1, 1, 1)
        fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
        gx, gy, gz = 1 - fx, 1 - fy, 1 - fz

        val = (
            c000 * gx * gy * gz
            + c100 * fx * gy * gz
            + c010 * gx * fy * gz
            + c110 * fx * fy * gz
            + c001 * gx * gy * fz
            + c101 * fx * gy * fz
            + c011 * gx * fy * fz
            + c111 * fx * fy * fz
        )
        sign = _sign_multiplier(spec, grid.values, p)
        value[inb] = sign * val

        if want_gradient:
            h = spec.voxel_size
            dx = (
                (c100 - c000) * gy * gz
                + (c110 - c010) * fy * gz
                + (c101 - c001) * gy * fz
                + (c111 - c011) * fy * fz
            ) / h
            dy = (
                (c010 - c000) * gx * gz
                + (c110 - c100) * fx * gz
                + (c011 - c001) * gx * fz
                + (c111 - c101) * fx * fz
            ) / h
            dz = (
                (c001 - c000) * gx * gy
                + (c101 - c100) * fx * gy
                + (c011 - c010) * gx * fy
                + (c111 - c110) * fx * fy
            ) / h
            local = np.stack([dx, dy, dz], axis=1) * unclamped * sign[:, None]
            grad[inb] = local

    if want_gradient:
        return value, grad
    return value


def signed_distance(sdf, grid, points):
    """Signed truncated distance at world points (scalar in, scalar out)."""
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    value = _interpolate(sdf, grid, pts, want_gradient=False)
    return float(value[0]) if scalar else value


def interpolate_with_gradient(sdf, grid, points):
    """Signed distance plus the exact gradient of the interpolant.

    This is the derivative the cost terms differentiate through; it is
    piecewise constant across voxel cells only in its coefficients, so
    it matches small-step finite differences of :func:`signed_distance`
    except exactly on cell faces and class boundaries.
    """
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    value, grad = _interpolate(sdf, grid, pts, want_gradient=True)
    if scalar:
        return float(value[0]), grad[0]
    return value, grad


def distance_gradient(sdf, grid, points, step: float | None = None):
    """Central differences of the signed distance, step = one voxel."""
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    p = np.atleast_2d(pts)
    h = step if step is not None else grid.spec.voxel_size
    grad = np.empty((p.shape[0], 3), dtype=float)
    for ax in range(3):
        offset = np.zeros(3)
        offset[ax] = h
        hi = _interpolate(sdf, grid, p + offset, want_gradient=False)
        lo = _interpolate(sdf, grid, p - offset, want_gradient=False)
        grad[:, ax] = (hi - lo) / (2.0 * h)
    return grad[0] if scalar else grad
