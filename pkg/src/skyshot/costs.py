"""The four trajectory objectives: smoothness, shot quality, safety, occlusion.

Smoothness and shot quality are exact quadratics ``0.5 * Tr(W'AW + 2W'b + c)
/ (n-1)`` with analytic gradient and Hessian.  Safety and occlusion are
arc-length-weighted sums of a truncated-distance penalty; both are
normalized by 1/(n-1) (the dt/t_f time weight), and their gradients are the
exact derivatives of the discrete sums: the penalty's chain rule runs
through the local gradient of the interpolated distance field, and the
product rule covers the discrete speed factors, whose terms are the
discrete counterpart of the continuum projection/curvature form.

Every function treats the map snapshot as read-only, so cost evaluation is
safe to run in parallel across candidate trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from skyshot.core import (
    CostWeights,
    DiffOperators,
    ShotParams,
    TimeGrid,
    Trajectory,
)
from skyshot.forecast import ActorForecast
from skyshot.mapping.sdf import interpolate_with_gradient

SPEED_EPS = 1e-9
_SIGHT_EPS = 1e-9

DEFAULT_EPS_OBS = 2.5

#: Minimum sight-line sample count.  Keeping it above the desk-scale line
#: lengths (in voxels) makes the sample count, and with it the occlusion
#: value, constant over the whole operating range; the ceil() fallback only
#: engages for unusually long sight lines and would otherwise introduce
#: value discontinuities exactly at integer line lengths.
OCCLUSION_MIN_SAMPLES = 25


@dataclass(frozen=True)
class QuadraticCost:
    """0.5 * scale * Tr(W'AW + 2W'b + c) with its gradient and Hessian."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    scale: float

    def value(self, waypoints: np.ndarray) -> float:
        W = waypoints
        return 0.5 * self.scale * float(
            np.trace(W.T @ self.A @ W + 2.0 * W.T @ self.b + self.c)
        )

    def gradient(self, waypoints: np.ndarray) -> np.ndarray:
        return self.scale * (self.A @ waypoints + self.b)

    def hessian(self) -> np.ndarray:
        return self.scale * self.A


@dataclass(frozen=True)
class CostReport:
    """Per-term values, Eq-weighted total, and the total's gradient."""

    smooth: float
    obstacle: float
    occlusion: float
    shot: float
    total: float
    gradient: np.ndarray

    def as_dict(self) -> dict:
        return {
            "smooth": self.smooth,
            "obstacle": self.obstacle,
            "occlusion": self.occlusion,
            "shot": self.shot,
            "total": self.total,
        }


def smoothness(traj: Trajectory, ops: DiffOperators):
    """Mean squared magnitude of derivative orders 1..3 (quadratic form)."""
    if ops.grid != traj.grid:
        raise ValueError("operators were built for a different time grid")
    quad = QuadraticCost(
        ops.A_total, ops.b_total, ops.c_total, 1.0 / traj.grid.waypoint_count
    )
    W = traj.waypoints
    return quad.value(W), quad.gradient(W), quad


def shot_offset(headings, omega: ShotParams) -> np.ndarray:
    """Spherical camera offset for actor headings (array in, (N,3) out)."""
    angles = np.asarray(headings, dtype=float) + omega.psi_rel
    st = math.sin(omega.theta_rel)
    return omega.rho * np.stack(
        [np.cos(angles) * st, np.sin(angles) * st,
         np.full(np.shape(angles), math.cos(omega.theta_rel))],
        axis=-1,
    )


def shot_path(actor: ActorForecast, omega: ShotParams) -> Trajectory:
    """Desired camera path: the forecast offset by the shot parameters."""
    offsets = shot_offset(actor.headings, omega)
    return Trajectory(actor.grid, (actor.positions + offsets)[1:])


def shot_quality(traj: Trajectory, shot_traj: Trajectory):
    """Half mean squared distance to the desired shot path (quadratic form)."""
    if traj.grid != shot_traj.grid:
        raise ValueError("trajectory and shot path use different time grids")
    m = traj.grid.waypoint_count
    S = shot_traj.waypoints
    quad = QuadraticCost(np.eye(m), -S, S.T @ S, 1.0 / m)
    W = traj.waypoints
    return quad.value(W), quad.gradient(W), quad


def obstacle_point_cost(d, eps_obs: float):
    """Distance penalty: linear inside obstacles, quadratic within eps, 0 far.

    Returns (cost, d cost / d distance); C1 at both knots.
    """
    if eps_obs <= 0:
        raise ValueError("eps_obs must be positive")
    d = np.asarray(d, dtype=float)
    scalar = d.ndim == 0
    d = np.atleast_1d(d)
    cost = np.zeros_like(d)
    slope = np.zeros_like(d)
    inside = d < 0
    near = (d >= 0) & (d <= eps_obs)
    cost[inside] = -d[inside] + 0.5 * eps_obs
    slope[inside] = -1.0
    cost[near] = (d[near] - eps_obs) ** 2 / (2.0 * eps_obs)
    slope[near] = (d[near] - eps_obs) / eps_obs
    if scalar:
        return float(cost[0]), float(slope[0])
    return cost, slope


def _motion(traj: Trajectory, ops: DiffOperators):
    """Discrete velocities, speeds, and unit directions (0 when stationary)."""
    V = ops.derivatives(traj.waypoints, 1)
    speeds = np.linalg.norm(V, axis=1)
    active = speeds > SPEED_EPS
    unit = np.zeros_like(V)
    unit[active] = V[active] / speeds[active, None]
    return speeds, unit, active


def _speed_chain_terms(weights_per_row: np.ndarray, unit: np.ndarray, dt: float):
    """Gradient contribution of the speed factors: row i gets
    (w_i u_i - w_{i+1} u_{i+1}) / dt."""
    T = weights_per_row[:, None] * unit
    out = T.copy()
    out[:-1] -= T[1:]
    return out / dt


def safety(traj: Trajectory, sdf, grid, ops: DiffOperators,
           eps_obs: float = DEFAULT_EPS_OBS):
    """Arc-length-weighted obstacle penalty along the trajectory."""
    if ops.grid != traj.grid:
        raise ValueError("operators were built for a different time grid")
    m = traj.grid.waypoint_count
    dt = traj.grid.step
    W = traj.waypoints

    d, dgrad = interpolate_with_gradient(sdf, grid, W)
    cost, slope = obstacle_point_cost(d, eps_obs)
    speeds, unit, active = _motion(traj, ops)

    value = float(np.sum(cost[active] * speeds[active])) / m

    grad = slope[:, None] * dgrad * speeds[:, None]
    grad[~active] = 0.0
    cost_active = np.where(active, cost, 0.0)
    grad += _speed_chain_terms(cost_active, unit, dt)
    return value, grad / m


def occlusion(traj: Trajectory, actor: ActorForecast, sdf, grid,
              ops: DiffOperators, eps_obs: float = DEFAULT_EPS_OBS):
    """Obstacle penalty integrated over the camera-actor sight manifold.

    Each timestep contributes |L| * mean(c over the sight line) * |v| / (n-1),
    with the sight line sampled at max(OCCLUSION_MIN_SAMPLES, ceil(|L|/voxel))
    midpoints so every crossed voxel is resolved.
    """
    if ops.grid != traj.grid:
        raise ValueError("operators were built for a different time grid")
    if len(actor) != traj.grid.count:
        raise ValueError("actor forecast is not aligned with the time grid")
    m = traj.grid.waypoint_count
    dt = traj.grid.step
    h = grid.spec.voxel_size
    W = traj.waypoints
    A = actor.positions[1:]

    L = A - W
    lnorm = np.linalg.norm(L, axis=1)
    sight = lnorm > _SIGHT_EPS
    lhat = np.zeros_like(L)
    lhat[sight] = L[sight] / lnorm[sight, None]
    speeds, unit, active = _motion(traj, ops)

    counts = np.where(
        sight,
        np.maximum(OCCLUSION_MIN_SAMPLES, np.ceil(lnorm / h).astype(int)),
        0,
    )
    total = int(counts.sum())
    inner_mean = np.zeros(m)
    lever = np.zeros((m, 3))
    if total > 0:
        row = np.repeat(np.arange(m), counts)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        within = np.arange(total) - starts[row]
        tau = (within + 0.5) / counts[row]
        pts = W[row] + tau[:, None] * L[row]
        d, dgrad = interpolate_with_gradient(sdf, grid, pts)
        c, slope = obstacle_point_cost(d, eps_obs)
        sum_c = np.bincount(row, weights=c, minlength=m)
        lever_w = (1.0 - tau) * slope
        for ax in range(3):
            lever[:, ax] = np.bincount(
                row, weights=lever_w * dgrad[:, ax], minlength=m
            )
        inner_mean[sight] = sum_c[sight] / counts[sight]
        lever[sight] /= counts[sight, None]

    inner = inner_mean * lnorm
    value = float(np.sum(inner[active] * speeds[active])) / m

    grad = speeds[:, None] * (lnorm[:, None] * lever - inner_mean[:, None] * lhat)
    grad[~active] = 0.0
    inner_active = np.where(active, inner, 0.0)
    grad += _speed_chain_terms(inner_active, unit, dt)
    return value, grad / m


def total_cost(
    traj: Trajectory,
    actor: ActorForecast,
    omega: ShotParams,
    weights: CostWeights,
    sdf,
    grid,
    ops: DiffOperators,
    eps_obs: float = DEFAULT_EPS_OBS,
    shot_traj: Trajectory | None = None,
) -> CostReport:
    """Weighted composite [1, obs, occ, shot] of the four objectives."""
    smooth_v, smooth_g, _ = smoothness(traj, ops)
    if shot_traj is None:
        shot_traj = shot_path(actor, omega)
    shot_v, shot_g, _ = shot_quality(traj, shot_traj)
    obs_v, obs_g = safety(traj, sdf, grid, ops, eps_obs)
    occ_v, occ_g = occlusion(traj, actor, sdf, grid, ops, eps_obs)

    total = (
        smooth_v
        + weights.lambda_obs * obs_v
        + weights.lambda_occ * occ_v
        + weights.lambda_shot * shot_v
    )
    gradient = (
        smooth_g
        + weights.lambda_obs * obs_g
        + weights.lambda_occ * occ_g
        + weights.lambda_shot * shot_g
    )
    return CostReport(
        smooth=smooth_v,
        obstacle=obs_v,
        occlusion=occ_v,
        shot=shot_v,
        total=total,
        gradient=gradient,
    )
