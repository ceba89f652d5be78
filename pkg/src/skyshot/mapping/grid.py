"""Voxel occupancy grid with change-tracked ray updates.

Each voxel stores an 8-bit belief in [0, 255], initialized to 127 (unknown).
A ray update subtracts ``l_free`` from every voxel strictly between sensor
and endpoint and, for hits, adds ``l_occ`` to the endpoint voxel, saturating
at the byte bounds.  A voxel is classified free when its value is at most
``t_free``, occupied when at least ``t_occ``, unknown otherwise.

Ray updates emit a :class:`ChangeSet` of border-cell candidates for the
signed distance field.  A border cell separates known free space from
occupied or unknown space: it is either an occupied voxel or an unknown
voxel with a free face neighbor.  Besides the classic transitions (a voxel
turning free retires itself and promotes its unknown neighbors; a hit
endpoint turning occupied promotes itself), saturating arithmetic also
allows free->unknown and occupied->unknown transitions, and a voxel leaving
the free class can strip border status from its unknown neighbors; all of
these are recorded so the distance field can reconcile exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from skyshot.mapping.traversal import clip_segment, voxel_line

CLASS_FREE = 0
CLASS_UNKNOWN = 1
CLASS_OCCUPIED = 2

_FACE_OFFSETS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
    dtype=np.int64,
)


@dataclass(frozen=True)
class GridSpec:
    """Geometry and update constants of an occupancy grid."""

    dims: tuple
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    voxel_size: float = 1.0
    l_free: int = 10
    l_occ: int = 40
    t_free: int = 107
    t_occ: int = 147

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError(f"dims must be three positive ints, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        origin = np.asarray(self.origin, dtype=float).reshape(3).copy()
        origin.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        if not 0 <= self.t_free < self.t_occ <= 255:
            raise ValueError("need 0 <= t_free < t_occ <= 255")

    @property
    def upper(self) -> np.ndarray:
        return self.origin + np.array(self.dims) * self.voxel_size

    def world_to_voxel(self, points) -> np.ndarray:
        """Voxel index containing each point (floor); no bounds check."""
        pts = np.asarray(points, dtype=float)
        return np.floor((pts - self.origin) / self.voxel_size).astype(np.int64)

    def voxel_center(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.voxel_size

    def in_bounds_point(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.all((pts >= self.origin) & (pts < self.upper), axis=-1)

    def in_bounds_voxel(self, idx) -> np.ndarray:
        iv = np.asarray(idx)
        dims = np.array(self.dims)
        return np.all((iv >= 0) & (iv < dims), axis=-1)

    def clamp_voxel(self, idx) -> np.ndarray:
        dims = np.array(self.dims, dtype=np.int64)
        return np.clip(np.asarray(idx, dtype=np.int64), 0, dims - 1)

    def flatten(self, idx) -> np.ndarray:
        iv = np.asarray(idx, dtype=np.int64)
        return np.ravel_multi_index((iv[..., 0], iv[..., 1], iv[..., 2]), self.dims)

    def unflatten(self, flat) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(flat), self.dims), axis=-1)


def classify(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Map raw byte values to CLASS_FREE / CLASS_UNKNOWN / CLASS_OCCUPIED."""
    out = np.full(np.shape(values), CLASS_UNKNOWN, dtype=np.uint8)
    out[values <= spec.t_free] = CLASS_FREE
    out[values >= spec.t_occ] = CLASS_OCCUPIED
    return out


class OccupancyGrid:
    """8-bit occupancy beliefs on a fixed voxel lattice."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.values = np.full(spec.dims, 127, dtype=np.uint8)

    def classes(self) -> np.ndarray:
        return classify(self.values, self.spec)

    def class_at(self, idx) -> int:
        i, j, k = (int(v) for v in idx)
        value = int(self.values[i, j, k])
        if value <= self.spec.t_free:
            return CLASS_FREE
        if value >= self.spec.t_occ:
            return CLASS_OCCUPIED
        return CLASS_UNKNOWN

    def is_border(self, idx) -> bool:
        """Occupied voxel, or unknown voxel with a free face neighbor."""
        cls = self.class_at(idx)
        if cls == CLASS_OCCUPIED:
            return True
        if cls != CLASS_UNKNOWN:
            return False
        for off in _FACE_OFFSETS:
            nb = np.asarray(idx) + off
            if self.spec.in_bounds_voxel(nb) and self.class_at(nb) == CLASS_FREE:
                return True
        return False

    def border_mask(self) -> np.ndarray:
        """Vectorized border predicate over the whole grid."""
        cls = self.classes()
        free = cls == CLASS_FREE
        adj_free = np.zeros(self.spec.dims, dtype=bool)
        for ax in range(3):
            src = [slice(None)] * 3
            dst = [slice(None)] * 3
            src[ax] = slice(1, None)
            dst[ax] = slice(None, -1)
            adj_free[tuple(dst)] |= free[tuple(src)]
            adj_free[tuple(src)] |= free[tuple(dst)]
        return (cls == CLASS_OCCUPIED) | ((cls == CLASS_UNKNOWN) & adj_free)


@dataclass
class ChangeSet:
    """Border insert/remove candidates emitted by ray updates.

    ``became_occ`` holds voxels that may need to join the border set,
    ``became_free`` voxels that may need to leave it; the lists are disjoint
    (flat indices).  The distance field rechecks each candidate against the
    grid, so a stale candidate is a no-op.
    """

    became_occ: list = field(default_factory=list)
    became_free: list = field(default_factory=list)

    def is_empty(self) -> bool:
        return not self.became_occ and not self.became_free

    def merge(self, other: "ChangeSet") -> "ChangeSet":
        self.became_occ.extend(other.became_occ)
        self.became_free.extend(other.became_free)
        return self


def _unknown_neighbors(grid: OccupancyGrid, idx: np.ndarray) -> list:
    out = []
    for off in _FACE_OFFSETS:
        nb = idx + off
        if grid.spec.in_bounds_voxel(nb) and grid.class_at(nb) == CLASS_UNKNOWN:
            out.append(int(grid.spec.flatten(nb)))
    return out


def update_grid(grid: OccupancyGrid, sensor, point, is_hit: bool) -> ChangeSet:
    """Apply one sensor ray to the grid and report border candidates.

    Voxels strictly between the sensor and the endpoint lose ``l_free``;
    the endpoint voxel gains ``l_occ`` iff ``is_hit``.  Rays are clipped to
    the grid box: the out-of-bounds part is skipped and a clipped-away hit
    endpoint is not scored.  A zero-length ray (both ends in one voxel) is a
    no-op.
    """
    spec = grid.spec
    clipped = clip_segment(sensor, point, spec.origin, spec.upper)
    if clipped is None:
        return ChangeSet()
    q0, q1, _, _ = clipped
    sensor_in = bool(spec.in_bounds_point(sensor))
    endpoint_in = bool(spec.in_bounds_point(point))

    v0 = spec.clamp_voxel(spec.world_to_voxel(q0))
    v1 = spec.clamp_voxel(spec.world_to_voxel(q1))
    cells = voxel_line(v0, v1)
    if len(cells) < 2:
        return ChangeSet()

    start = 1 if sensor_in else 0
    stop = len(cells) - 1 if endpoint_in else len(cells)

    insert_cand: set = set()
    remove_cand: set = set()
    unknown_pending: list = []

    def record(idx: np.ndarray, old_cls: int) -> None:
        new_cls = grid.class_at(idx)
        if new_cls == old_cls:
            return
        flat = int(spec.flatten(idx))
        if new_cls == CLASS_FREE:
            remove_cand.add(flat)
            insert_cand.update(_unknown_neighbors(grid, idx))
        elif new_cls == CLASS_OCCUPIED:
            insert_cand.add(flat)
        else:
            unknown_pending.append((flat, idx.copy()))
        if old_cls == CLASS_FREE:
            remove_cand.update(_unknown_neighbors(grid, idx))

    values = grid.values
    for idx in cells[start:stop]:
        i, j, k = (int(v) for v in idx)
        old_cls = grid.class_at(idx)
        values[i, j, k] = max(0, int(values[i, j, k]) - spec.l_free)
        record(idx, old_cls)

    if is_hit and endpoint_in:
        idx = cells[-1]
        i, j, k = (int(v) for v in idx)
        old_cls = grid.class_at(idx)
        values[i, j, k] = min(255, int(values[i, j, k]) + spec.l_occ)
        record(idx, old_cls)

    for flat, idx in unknown_pending:
        (insert_cand if grid.is_border(idx) else remove_cand).add(flat)
    overlap = insert_cand & remove_cand
    for flat in overlap:
        idx = spec.unflatten(flat)
        if grid.is_border(idx):
            remove_cand.discard(flat)
        else:
            insert_cand.discard(flat)

    return ChangeSet(sorted(insert_cand), sorted(remove_cand))


def line_of_sight(grid: OccupancyGrid, a, b) -> bool:
    """True iff no voxel on the discrete segment a -> b is occupied.

    Both endpoint voxels are included.  The out-of-map part of a segment is
    treated as transparent.
    """
    spec = grid.spec
    clipped = clip_segment(a, b, spec.origin, spec.upper)
    if clipped is None:
        return True
    q0, q1, _, _ = clipped
    v0 = spec.clamp_voxel(spec.world_to_voxel(q0))
    v1 = spec.clamp_voxel(spec.world_to_voxel(q1))
    cells = voxel_line(v0, v1)
    vals = grid.values[cells[:, 0], cells[:, 1], cells[:, 2]]
    return not np.any(vals >= spec.t_occ)
