"""Pinhole camera with terrain raycasting.

Camera frame convention: +z along the optical axis, +x right, +y down in the
image.  ``rotation`` maps camera-frame vectors to world frame.  Image-space
headings are measured from the +u axis with the v axis flipped (so a heading
of 0 points right in the image and +pi/2 points up), which makes a nadir
camera's image heading coincide with world yaw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from skyshot.mapping.heightmap import HeightMap


class NoIntersectionError(RuntimeError):
    """Raised when a pixel ray never meets the terrain within max range."""


@dataclass(frozen=True)
class CameraModel:
    position: np.ndarray
    rotation: np.ndarray
    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 1280
    height: int = 720

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3).copy()
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3).copy()
        rot.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @classmethod
    def nadir(cls, position, yaw: float = 0.0, **kwargs) -> "CameraModel":
        """Camera looking straight down; image +u maps to world heading ``yaw``."""
        c, s = math.cos(yaw), math.sin(yaw)
        yaw_rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        rotation = yaw_rot @ np.diag([1.0, -1.0, -1.0])
        return cls(position=position, rotation=rotation, **kwargs)

    @classmethod
    def tilted(cls, position, yaw: float, tilt: float, **kwargs) -> "CameraModel":
        """Camera yawed in the world plane, pitched down by ``tilt`` < pi/2 rad."""
        cy_, sy = math.cos(yaw), math.sin(yaw)
        ct, st = math.cos(tilt), math.sin(tilt)
        forward = np.array([cy_ * ct, sy * ct, -st])
        right = np.array([sy, -cy_, 0.0])
        down = np.cross(forward, right)
        rotation = np.stack([right, down, forward], axis=1)
        return cls(position=position, rotation=rotation, **kwargs)

    def pixel_ray(self, pixel) -> np.ndarray:
        """Unit world-frame direction of a pixel's viewing ray."""
        u, v = float(pixel[0]), float(pixel[1])
        d_cam = np.array([(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0])
        d = self.rotation @ d_cam
        return d / np.linalg.norm(d)


def raycast_pixel_to_ground(
    cam: CameraModel,
    pixel,
    hm: HeightMap,
    max_range: float = 200.0,
) -> np.ndarray:
    """March a pixel ray until it drops below the terrain, then refine.

    Steps of half a height-map cell; the crossing is located by a linear
    solve between the bracketing samples, which is exact over flat cells.
    """
    direction = cam.pixel_ray(pixel)
    step = hm.cell_size * 0.5
    s_prev = 0.0
    f_prev = cam.position[2] - hm.height_at(cam.position[:2])
    if f_prev <= 0.0:
        raise NoIntersectionError("camera at or below terrain")
    s = step
    while s <= max_range:
        p = cam.position + s * direction
        f = p[2] - hm.height_at(p[:2])
        if f <= 0.0:
            t = f_prev / (f_prev - f) if f_prev != f else 0.0
            s_hit = s_prev + t * (s - s_prev)
            return cam.position + s_hit * direction
        s_prev, f_prev = s, f
        s += step
    raise NoIntersectionError(
        f"pixel {tuple(pixel)} ray never intersects terrain within {max_range} m"
    )


def project_heading_to_world(
    cam: CameraModel,
    pixel,
    image_heading: float,
    hm: HeightMap,
    max_range: float = 200.0,
) -> float:
    """Ground-plane heading of an image-space direction at a pixel.

    Casts the pixel and a second pixel displaced one unit along the image
    heading onto the terrain; the world heading is the atan2 of the
    displacement between the two ground intersections.
    """
    base = raycast_pixel_to_ground(cam, pixel, hm, max_range)
    du = math.cos(image_heading)
    dv = -math.sin(image_heading)
    shifted_pixel = (float(pixel[0]) + du, float(pixel[1]) + dv)
    ahead = raycast_pixel_to_ground(cam, shifted_pixel, hm, max_range)
    delta = ahead - base
    if np.hypot(delta[0], delta[1]) == 0.0:
        raise NoIntersectionError("degenerate ground displacement")
    return math.atan2(delta[1], delta[0])
