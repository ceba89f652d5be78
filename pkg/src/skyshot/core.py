"""Shared domain types, time discretization, and finite-difference operators.

The planner works on a discrete trajectory: ``n - 1`` free waypoints at times
``i * dt`` (i = 1..n-1) plus a fixed start state (position, velocity,
acceleration) at t = 0.  Derivatives of the waypoint matrix are linear maps
``K_d @ W + e_d`` where ``K_d`` is a banded difference operator and ``e_d``
carries the start-state contribution into the first rows.  The quadratic
forms ``A_d = K_d.T K_d``, ``b_d = K_d.T e_d``, ``c_d = e_d.T e_d`` are what
the smoothness cost and the optimizer's metric are assembled from.

All values here are immutable after construction (arrays are marked
read-only), so they can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "wrap_angle",
    "Pose",
    "TimeGrid",
    "BoundaryCondition",
    "Trajectory",
    "ShotParams",
    "CostWeights",
    "DiffOperators",
    "build_diff_operators",
    "heading_for",
]


def wrap_angle(angle):
    """Normalize an angle (scalar or array) to (-pi, pi]."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    wrapped = np.where(wrapped == -math.pi, math.pi, wrapped)
    if np.ndim(angle) == 0:
        return float(wrapped)
    return wrapped


def _as_point(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(3).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pose:
    """A position plus a heading normalized to (-pi, pi]."""

    position: np.ndarray
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "position", _as_point(self.position, "position"))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time discretization: ``count`` samples over ``horizon`` seconds.

    ``count`` is the total number of grid points including t = 0; the number
    of optimized waypoints is ``count - 1`` and the step is
    ``horizon / (count - 1)``.
    """

    horizon: float
    count: int

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.count < 3:
            raise ValueError(f"count must be >= 3, got {self.count}")

    @property
    def step(self) -> float:
        return self.horizon / (self.count - 1)

    @property
    def waypoint_count(self) -> int:
        return self.count - 1

    def times(self) -> np.ndarray:
        """Sample times 0, dt, ..., horizon (length ``count``)."""
        return np.arange(self.count) * self.step

    def waypoint_times(self) -> np.ndarray:
        """Times of the optimized waypoints: dt, ..., horizon."""
        return np.arange(1, self.count) * self.step


@dataclass(frozen=True)
class BoundaryCondition:
    """Fixed start state of a trajectory: position, velocity, acceleration."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "position", _as_point(self.position, "position"))
        object.__setattr__(self, "velocity", _as_point(self.velocity, "velocity"))
        object.__setattr__(
            self, "acceleration", _as_point(self.acceleration, "acceleration")
        )


@dataclass(frozen=True)
class Trajectory:
    """Optimized waypoints p_1..p_{n-1} on a time grid (start point excluded)."""

    grid: TimeGrid
    waypoints: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.waypoints, dtype=float).copy()
        if pts.shape != (self.grid.waypoint_count, 3):
            raise ValueError(
                f"waypoints must have shape {(self.grid.waypoint_count, 3)}, "
                f"got {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("waypoints must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "waypoints", pts)

    def with_waypoints(self, waypoints) -> "Trajectory":
        return Trajectory(self.grid, waypoints)


@dataclass(frozen=True)
class ShotParams:
    """Desired camera placement relative to the actor.

    ``rho`` is the camera-to-actor distance in meters, ``psi_rel`` the yaw
    offset from the actor's heading in [0, 2*pi), and ``theta_rel`` the tilt
    from straight overhead in [0, pi] (pi/2 = actor height).
    """

    rho: float
    psi_rel: float
    theta_rel: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        object.__setattr__(self, "psi_rel", float(self.psi_rel) % (2.0 * math.pi))
        if not 0.0 <= self.theta_rel <= math.pi:
            raise ValueError(f"theta_rel must lie in [0, pi], got {self.theta_rel}")


@dataclass(frozen=True)
class CostWeights:
    """Weights of the obstacle, occlusion, and shot-quality terms.

    The smoothness term always carries weight 1.
    """

    lambda_obs: float = 1.0
    lambda_occ: float = 1.0
    lambda_shot: float = 1.0

    def __post_init__(self):
        for name in ("lambda_obs", "lambda_occ", "lambda_shot"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiffOperators:
    """Difference operators and quadratic forms for derivative orders 1..3.

    For order d, the d-th derivative of the waypoint matrix W is
    ``K[d] @ W + e[d]``.  ``A[d] = K[d].T @ K[d]``, ``b[d] = K[d].T @ e[d]``,
    ``c[d] = e[d].T @ e[d]``.  ``A_total/b_total/c_total`` are the
    alpha-weighted sums used by the smoothness cost; A_total is symmetric
    positive definite because the first-order operator alone is nonsingular.
    """

    grid: TimeGrid
    bc: BoundaryCondition
    alphas: tuple
    K: dict
    e: dict
    A: dict
    b: dict
    c: dict
    A_total: np.ndarray
    b_total: np.ndarray
    c_total: np.ndarray

    def derivatives(self, waypoints: np.ndarray, order: int) -> np.ndarray:
        """d-th finite-difference derivative rows for d in {1, 2, 3}."""
        return self.K[order] @ waypoints + self.e[order]


def build_diff_operators(
    grid: TimeGrid,
    bc: BoundaryCondition,
    alphas: tuple = (1.0, 1.0, 1.0),
) -> DiffOperators:
    """Build banded difference operators and their quadratic forms.

    The first-order operator is lower bidiagonal with +1/dt on the diagonal
    and -1/dt below it; higher orders are its powers with the start-state
    velocity/acceleration folded into the boundary columns.
    """
    if len(alphas) != 3:
        raise ValueError("alphas must have one weight per derivative order 1..3")
    m = grid.waypoint_count
    dt = grid.step

    diff = np.eye(m) - np.eye(m, k=-1)
    e_pos = np.zeros((m, 3))
    e_pos[0] = -bc.position
    e_vel = np.zeros((m, 3))
    e_vel[0] = -bc.velocity
    e_acc = np.zeros((m, 3))
    e_acc[0] = -bc.acceleration

    K = {
        1: diff / dt,
        2: (diff @ diff) / dt**2,
        3: (diff @ diff @ diff) / dt**3,
    }
    e = {
        1: e_pos / dt,
        2: (diff @ e_pos) / dt**2 + e_vel / dt,
        3: (diff @ diff @ e_pos) / dt**3 + (diff @ e_vel) / dt**2 + e_acc / dt,
    }
    A = {d: K[d].T @ K[d] for d in (1, 2, 3)}
    b = {d: K[d].T @ e[d] for d in (1, 2, 3)}
    c = {d: e[d].T @ e[d] for d in (1, 2, 3)}

    A_total = sum(alphas[d - 1] * A[d] for d in (1, 2, 3))
    b_total = sum(alphas[d - 1] * b[d] for d in (1, 2, 3))
    c_total = sum(alphas[d - 1] * c[d] for d in (1, 2, 3))

    return DiffOperators(
        grid=grid,
        bc=bc,
        alphas=tuple(float(a) for a in alphas),
        K={d: _frozen(K[d]) for d in K},
        e={d: _frozen(e[d]) for d in e},
        A={d: _frozen(A[d]) for d in A},
        b={d: _frozen(b[d]) for d in b},
        c={d: _frozen(c[d]) for d in c},
        A_total=_frozen(A_total),
        b_total=_frozen(b_total),
        c_total=_frozen(c_total),
    )


#: Horizontal distances below this are treated as "camera above actor".
COINCIDENT_EPS = 1e-9


def heading_for(
    traj: Trajectory,
    actor_positions: np.ndarray,
    start: BoundaryCondition | None = None,
) -> np.ndarray:
    """Camera yaw per waypoint: point from the waypoint toward the actor.

    ``actor_positions`` holds one actor sample per grid time (length
    ``grid.count``, sample 0 at t = 0); waypoint i pairs with sample i.
    When camera and actor are horizontally coincident the previous
    waypoint's heading is carried over (seeded from the start point's
    heading toward actor sample 0 when available, else 0).
    """
    actor = np.asarray(actor_positions, dtype=float)
    if actor.shape[0] != traj.grid.count:
        raise ValueError(
            f"actor positions must cover every grid time "
            f"({traj.grid.count} samples), got {actor.shape[0]}"
        )
    prev = 0.0
    if start is not None:
        d0 = actor[0, :2] - start.position[:2]
        if np.hypot(d0[0], d0[1]) > COINCIDENT_EPS:
            prev = math.atan2(d0[1], d0[0])
    headings = np.empty(traj.grid.waypoint_count)
    for i, wp in enumerate(traj.waypoints):
        delta = actor[i + 1, :2] - wp[:2]
        if np.hypot(delta[0], delta[1]) > COINCIDENT_EPS:
            prev = math.atan2(delta[1], delta[0])
        headings[i] = wrap_angle(prev)
    return headings
