"""Trajectory optimization by covariant gradient descent.

The metric M = (A_smooth + lambda_shot * A_shot) / (n-1) is the exact Hessian
of the quadratic part of the objective; it is factored once per plan and the
iteration is W <- W - (1/eta) * M^-1 grad J(W).  Descent stops on the Newton
decrement (grad' M^-1 grad / 2), on a small relative cost decrease, or at the
iteration cap, and the best-seen iterate is returned (a fixed step on the
nonconvex terms can overshoot).

Warm starting shifts the previous plan by the elapsed time and extends the
vacated tail with a constant-curvature arc through the last three waypoints.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from skyshot.core import (
    BoundaryCondition,
    CostWeights,
    ShotParams,
    TimeGrid,
    Trajectory,
    build_diff_operators,
    heading_for,
)
from skyshot.costs import CostReport, shot_path, total_cost
from skyshot.forecast import (
    ActorForecast,
    ActorMeasurement,
    ekf_forecast,
    ekf_init,
    ekf_update,
    kf_forecast,
    kf_init,
    kf_update,
)


class PlanningError(RuntimeError):
    """Raised when the objective turns non-finite (corrupt map input)."""


@dataclass(frozen=True)
class PlannerConfig:
    weights: CostWeights = field(default_factory=CostWeights)
    shot: ShotParams = field(default_factory=lambda: ShotParams(
        rho=18.0, psi_rel=math.pi, theta_rel=math.radians(75.0)))
    step_gain: float = 10.0
    eps_curvature: float = 1e-6
    eps_decrease: float = 1e-5
    max_iters: int = 50
    eps_obs: float = 2.5
    alphas: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.step_gain <= 0 or self.eps_curvature <= 0 or self.eps_decrease <= 0:
            raise ValueError("step_gain and stopping thresholds must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True)
class PlanResult:
    trajectory: Trajectory
    headings: np.ndarray
    report: CostReport
    iterations: int
    wall_time: float
    factorizations: int
    time: float
    bc: BoundaryCondition


def optimize(
    init: Trajectory,
    bc: BoundaryCondition,
    actor: ActorForecast,
    sdf,
    grid,
    cfg: PlannerConfig,
    now: float = 0.0,
) -> PlanResult:
    """Minimize the composite objective from ``init``; metric factored once."""
    t_start = _time.perf_counter()
    tgrid = init.grid
    m = tgrid.waypoint_count
    ops = build_diff_operators(tgrid, bc, cfg.alphas)

    metric = (ops.A_total + cfg.weights.lambda_shot * np.eye(m)) / m
    factor = cho_factor(metric)
    factorizations = 1

    shot_traj = shot_path(actor, cfg.shot)
    W = init.waypoints.copy()
    best_value = math.inf
    best_W = W.copy()
    best_report = None
    prev_value = None
    iterations = 0

    for it in range(1, cfg.max_iters + 1):
        iterations = it
        report = total_cost(
            Trajectory(tgrid, W), actor, cfg.shot, cfg.weights, sdf, grid, ops,
            cfg.eps_obs, shot_traj=shot_traj,
        )
        for name, value in (
            ("smoothness", report.smooth),
            ("safety", report.obstacle),
            ("occlusion", report.occlusion),
            ("shot quality", report.shot),
        ):
            if not math.isfinite(value):
                raise PlanningError(f"{name} cost is non-finite")
        if not np.all(np.isfinite(report.gradient)):
            raise PlanningError("cost gradient is non-finite")

        if report.total < best_value:
            best_value = report.total
            best_W = W.copy()
            best_report = report

        step = cho_solve(factor, report.gradient)
        decrement = 0.5 * float(np.sum(report.gradient * step))
        if decrement < cfg.eps_curvature:
            break
        if prev_value is not None:
            # plateau test: a large negative change is a fixed-step overshoot,
            # which best-seen tracking absorbs; keep iterating through it
            change = abs(prev_value - report.total) / max(abs(prev_value), 1e-12)
            if change < cfg.eps_decrease:
                break
        prev_value = report.total
        if it == cfg.max_iters:
            break
        W = W - step / cfg.step_gain

    traj = Trajectory(tgrid, best_W)
    headings = heading_for(traj, actor.positions, start=bc)
    return PlanResult(
        trajectory=traj,
        headings=headings,
        report=best_report,
        iterations=iterations,
        wall_time=_time.perf_counter() - t_start,
        factorizations=factorizations,
        time=now,
        bc=bc,
    )


# -- warm starting -------------------------------------------------------------


def _circumcircle_extension(points: np.ndarray, extra: int) -> np.ndarray:
    """Continue a 3-point constant-curvature arc by ``extra`` samples.

    Collinear points (or a degenerate triangle) continue the last segment.
    """
    p1, p2, p3 = points[-3], points[-2], points[-1]
    ab = p2 - p1
    ac = p3 - p1
    normal = np.cross(ab, ac)
    span = max(np.linalg.norm(ab), np.linalg.norm(ac), 1e-12)
    out = np.empty((extra, 3))
    if np.linalg.norm(normal) < 1e-9 * span**2:
        step = p3 - p2
        for k in range(extra):
            out[k] = p3 + (k + 1) * step
        return out

    denom = 2.0 * float(np.dot(normal, normal))
    center = p1 + (
        np.dot(ac, ac) * np.cross(normal, ab) + np.dot(ab, ab) * np.cross(ac, normal)
    ) / denom
    axis = normal / np.linalg.norm(normal)
    u = p2 - center
    w = p3 - center
    angle = math.atan2(float(np.dot(np.cross(u, w), axis)), float(np.dot(u, w)))

    cos_a, sin_a = math.cos(angle), math.sin(angle)
    cur = w
    for k in range(extra):
        cur = cur * cos_a + np.cross(axis, cur) * sin_a + axis * np.dot(axis, cur) * (1 - cos_a)
        out[k] = center + cur
    return out


def _sample_path(full: np.ndarray, dt: float, t: float) -> np.ndarray:
    """Linear interpolation over samples at 0, dt, 2dt, ... (t clamped)."""
    s = min(max(t / dt, 0.0), len(full) - 1.0)
    i = min(int(math.floor(s)), len(full) - 2)
    f = s - i
    return (1.0 - f) * full[i] + f * full[i + 1]


def warm_start(prev: PlanResult, elapsed: float) -> Trajectory:
    """Shift the previous plan by ``elapsed`` and extend the tail.

    Exact at integer multiples of the grid step; fractional shifts
    interpolate linearly along the previous path.
    """
    grid = prev.trajectory.grid
    if not 0.0 <= elapsed < grid.horizon:
        raise ValueError(f"elapsed must lie in [0, horizon), got {elapsed}")
    if elapsed == 0.0:
        return prev.trajectory
    dt = grid.step
    full = np.vstack([prev.bc.position, prev.trajectory.waypoints])
    extra = int(math.ceil(elapsed / dt - 1e-12))
    if len(full) >= 3:
        ext = _circumcircle_extension(full, extra)
    else:
        step = full[-1] - full[0]
        ext = full[-1] + np.outer(np.arange(1, extra + 1), step)
    extended = np.vstack([full, ext])
    new_wp = np.empty((grid.waypoint_count, 3))
    for i in range(1, grid.count):
        new_wp[i - 1] = _sample_path(extended, dt, i * dt + elapsed)
    return Trajectory(grid, new_wp)


def boundary_after(prev: PlanResult, elapsed: float) -> BoundaryCondition:
    """Start state (position / velocity / acceleration) after flying the
    previous plan for ``elapsed`` seconds."""
    grid = prev.trajectory.grid
    dt = grid.step
    full = np.vstack([prev.bc.position, prev.trajectory.waypoints])
    pos = _sample_path(full, dt, elapsed)
    if elapsed >= dt:
        back1 = _sample_path(full, dt, elapsed - dt)
        vel = (pos - back1) / dt
        if elapsed >= 2 * dt:
            back2 = _sample_path(full, dt, elapsed - 2 * dt)
            acc = (pos - 2 * back1 + back2) / dt**2
        else:
            acc = prev.bc.acceleration
    else:
        vel = prev.bc.velocity
        acc = prev.bc.acceleration
    return BoundaryCondition(pos, vel, acc)


# -- per-cycle pipeline ----------------------------------------------------------


@dataclass
class WorldModel:
    """The maps a planning cycle reads: distance field, occupancy, terrain."""

    sdf: object
    grid: object
    hm: object


class PlanningSession:
    """Owns the actor filter and the previous plan across planning cycles.

    One session drives one UAV; cycles must not interleave.
    """

    def __init__(
        self,
        cfg: PlannerConfig,
        grid: TimeGrid,
        start: BoundaryCondition,
        actor_kind: str = "person",
        filter_kwargs: dict | None = None,
    ):
        if actor_kind not in ("person", "vehicle"):
            raise ValueError(f"unknown actor kind {actor_kind!r}")
        self.cfg = cfg
        self.grid = grid
        self.start = start
        self.actor_kind = actor_kind
        self.filter_kwargs = dict(filter_kwargs or {})
        self.filter_state = None
        self.prev: PlanResult | None = None

    def observe(self, measurement: ActorMeasurement) -> None:
        if self.actor_kind == "person":
            if self.filter_state is None:
                self.filter_state = kf_init(measurement, **self.filter_kwargs)
            else:
                self.filter_state = kf_update(self.filter_state, measurement)
        else:
            if self.filter_state is None:
                self.filter_state = ekf_init(measurement, **self.filter_kwargs)
            else:
                self.filter_state = ekf_update(self.filter_state, measurement)

    def forecast(self, hm) -> ActorForecast:
        if self.filter_state is None:
            raise PlanningError("no actor measurements received yet")
        if self.actor_kind == "person":
            return kf_forecast(self.filter_state, self.grid, hm)
        return ekf_forecast(self.filter_state, self.grid, hm)

    def plan_cycle(
        self,
        measurements,
        world: WorldModel,
        now: float,
    ) -> PlanResult:
        """Filter -> forecast -> warm or cold init -> optimize -> headings."""
        for m in measurements:
            self.observe(m)
        actor = self.forecast(world.hm)

        if self.prev is None:
            init = shot_path(actor, self.cfg.shot)
            bc = self.start
        else:
            elapsed = now - self.prev.time
            if 0.0 <= elapsed < self.grid.horizon:
                init = warm_start(self.prev, elapsed)
                bc = boundary_after(self.prev, elapsed)
            else:
                init = shot_path(actor, self.cfg.shot)
                bc = boundary_after(
                    self.prev, min(max(elapsed, 0.0), self.grid.horizon - self.grid.step)
                )
        result = optimize(init, bc, actor, world.sdf, world.grid, self.cfg, now=now)
        self.prev = result
        return result
