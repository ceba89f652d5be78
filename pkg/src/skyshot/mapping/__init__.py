"""Occupancy grid, incremental truncated signed distance field, height map,
and the geometric queries built on them."""

from skyshot.mapping.grid import (
    CLASS_FREE,
    CLASS_OCCUPIED,
    CLASS_UNKNOWN,
    ChangeSet,
    GridSpec,
    OccupancyGrid,
    line_of_sight,
    update_grid,
)
from skyshot.mapping.heightmap import HeightMap
from skyshot.mapping.sdf import (
    MapSnapshot,
    SignedDistanceField,
    distance_gradient,
    ingest_scan,
    signed_distance,
)
from skyshot.mapping.camera import (
    CameraModel,
    NoIntersectionError,
    project_heading_to_world,
    raycast_pixel_to_ground,
)

__all__ = [
    "CLASS_FREE",
    "CLASS_OCCUPIED",
    "CLASS_UNKNOWN",
    "ChangeSet",
    "GridSpec",
    "OccupancyGrid",
    "line_of_sight",
    "update_grid",
    "HeightMap",
    "MapSnapshot",
    "SignedDistanceField",
    "distance_gradient",
    "ingest_scan",
    "signed_distance",
    "CameraModel",
    "NoIntersectionError",
    "project_heading_to_world",
    "raycast_pixel_to_ground",
]
