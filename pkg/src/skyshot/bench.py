"""Benchmark drivers shared by the CLI: gradient checks, mapping equivalence,
and the two planner studies (occlusion ablation, horizon sweep)."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from skyshot.core import (
    BoundaryCondition,
    ShotParams,
    TimeGrid,
    Trajectory,
    build_diff_operators,
)
from skyshot.costs import occlusion, safety, shot_path, shot_quality, smoothness
from skyshot.forecast import ActorForecast
from skyshot.mapping.grid import GridSpec, OccupancyGrid, update_grid
from skyshot.mapping.sdf import SignedDistanceField
from skyshot.seeding import rng_for
from skyshot.sim.scenario import ScenarioConfig, run_scenario
from skyshot.sim.worlds import gen_sphere_world

QUAD_FD_STEP = 1e-3
FIELD_FD_STEP = 1e-6


def _fd_gradient(fn, waypoints: np.ndarray, step: float) -> np.ndarray:
    grad = np.zeros_like(waypoints)
    for i in range(waypoints.shape[0]):
        for ax in range(3):
            plus = waypoints.copy()
            plus[i, ax] += step
            minus = waypoints.copy()
            minus[i, ax] -= step
            grad[i, ax] = (fn(plus) - fn(minus)) / (2.0 * step)
    return grad


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-300)
    return float(np.linalg.norm(analytic - numeric) / scale)


def _random_instance(seed: int):
    rng = rng_for(seed, "grad-check")
    world = gen_sphere_world(
        12, seed, box=40.0, height=20.0,
        radius_range=(1.5, 3.0), center_z_range=(1.0, 9.0),
        corridor_half_width=2.0,
    )
    tgrid = TimeGrid(horizon=8.0, count=17)
    bc = BoundaryCondition(
        rng.uniform([-12, -12, 3], [-6, -6, 8]),
        rng.normal(0.0, 1.0, 3),
        rng.normal(0.0, 0.5, 3),
    )
    ops = build_diff_operators(tgrid, bc)
    steps = rng.normal(0.7, 0.8, (tgrid.waypoint_count, 3)) * [1.0, 1.0, 0.25]
    waypoints = bc.position + np.cumsum(steps, axis=0)
    times = tgrid.times()
    start = rng.uniform([-10, -10], [10, 10])
    velocity = rng.uniform([-1.5, -1.5], [1.5, 1.5])
    positions = np.stack(
        [start[0] + velocity[0] * times, start[1] + velocity[1] * times,
         np.zeros_like(times)], axis=1,
    )
    actor = ActorForecast(tgrid, times, positions,
                          np.full(len(times), rng.uniform(-math.pi, math.pi)))
    return world, tgrid, bc, ops, waypoints, actor


def gradient_check(seed: int = 0, instances: int = 20) -> dict:
    """Max relative error of each analytic gradient vs central differences."""
    worst = {"smoothness": 0.0, "shot_quality": 0.0, "safety": 0.0, "occlusion": 0.0}
    for k in range(instances):
        world, tgrid, bc, ops, W, actor = _random_instance(seed + k)
        omega = ShotParams(8.0, math.pi / 2.0, math.radians(75.0))
        starget = shot_path(actor, omega)

        def traj(Wx):
            return Trajectory(tgrid, Wx)

        checks = {
            "smoothness": (lambda Wx: smoothness(traj(Wx), ops)[:2], QUAD_FD_STEP),
            "shot_quality": (lambda Wx: shot_quality(traj(Wx), starget)[:2],
                             QUAD_FD_STEP),
            "safety": (lambda Wx: safety(traj(Wx), world.sdf, world.grid, ops),
                       FIELD_FD_STEP),
            "occlusion": (lambda Wx: occlusion(traj(Wx), actor, world.sdf,
                                               world.grid, ops),
                          FIELD_FD_STEP),
        }
        for name, (fn, step) in checks.items():
            _, grad = fn(W)
            numeric = _fd_gradient(lambda Wx: fn(Wx)[0], W, step)
            worst[name] = max(worst[name], _relative_error(grad, numeric))
    return worst


def map_bench(seed: int = 0, size: int = 32, rays: int = 100) -> dict:
    """Random-ray mapping run: incremental field vs from-scratch rebuild."""
    spec = GridSpec(dims=(size, size, size))
    grid = OccupancyGrid(spec)
    sdf = SignedDistanceField(spec, truncation=10.0)
    rng = rng_for(seed, "map-bench")
    lo = spec.origin
    hi = spec.upper
    t0 = time.perf_counter()
    for _ in range(rays):
        sensor = rng.uniform(lo + 1.0, hi - 1.0)
        point = rng.uniform(lo + 1.0, hi - 1.0)
        changes = update_grid(grid, sensor, point, bool(rng.random() < 0.7))
        sdf.apply_changes(grid, changes)
    incremental_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    reference = SignedDistanceField(spec, truncation=sdf.truncation)
    reference.rebuild(grid)
    rebuild_s = time.perf_counter() - t0
    return {
        "rays": rays,
        "grid": size,
        "border_cells": int(sdf.border.sum()),
        "max_abs_diff": float(np.abs(sdf.magnitude - reference.magnitude).max()),
        "borders_match": bool(np.array_equal(sdf.border, reference.border)),
        "incremental_seconds": incremental_s,
        "rebuild_seconds": rebuild_s,
    }


OCCLUSION_STUDY = {
    "world": {
        "kind": "spheres",
        "count": 20,
        "radius_range": [1.5, 3.0],
        "center_z_range": [1.0, 4.5],
        "center_x_range": [-16.0, 16.0],
        "camera_track": [15.65, 3.33, 3.0],
        "corridor_half_width": 4.0,
    },
    "shot": {"rho": 16.0, "psi_rel": math.pi / 2.0,
             "theta_rel": math.radians(78.0)},
    "weights_on": {"lambda_obs": 100.0, "lambda_occ": 4.0, "lambda_shot": 1.0},
    "weights_off": {"lambda_obs": 100.0, "lambda_occ": 0.0, "lambda_shot": 1.0},
    "planner": {"step_gain": 1.5, "max_iters": 80, "eps_decrease": 1e-8,
                "eps_obs": 2.5},
    "duration": 24.0,
}


def _scenario_for(study: dict, seed: int, with_occlusion: bool,
                  clutter: int | None = None) -> ScenarioConfig:
    world = dict(study["world"])
    if clutter is not None:
        world["count"] = clutter
    return ScenarioConfig(
        world=world,
        shot=dict(study["shot"]),
        weights=dict(study["weights_on" if with_occlusion else "weights_off"]),
        planner=dict(study["planner"]),
        duration=study["duration"],
        seed=seed,
    )


def occlusion_study(seeds, clutter_levels=(1, 10, 20), jobs: int = 1) -> list:
    """Visibility/shot-distance rows for both cost settings per clutter level."""
    tasks = []
    for clutter in clutter_levels:
        for with_occ in (True, False):
            for seed in seeds:
                tasks.append((clutter, with_occ, seed))

    def run(task):
        clutter, with_occ, seed = task
        metrics, _ = run_scenario(
            _scenario_for(OCCLUSION_STUDY, seed, with_occ, clutter)
        )
        return {
            "clutter": clutter,
            "costs": "occ+obs" if with_occ else "obs",
            "seed": seed,
            "visibility": metrics.visibility,
            "shot_distance": metrics.mean_shot_distance,
            "collided": int(metrics.collided),
        }

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(t) for t in tasks]
    rows.sort(key=lambda r: (r["clutter"], r["costs"], r["seed"]))
    return rows


HORIZON_STUDY = {
    "world": {"kind": "mound", "height": 6.0, "sigma": 5.0},
    "actor": {"kind": "line", "start": [0.0, 0.0], "heading": 0.0, "speed": 1.5},
    "shot": {"rho": 12.0, "psi_rel": math.pi / 2.0, "theta_rel": math.radians(70.0)},
    "weights": {"lambda_obs": 100.0, "lambda_occ": 4.0, "lambda_shot": 1.0},
    "planner": {"step_gain": 4.0, "max_iters": 40, "eps_decrease": 1e-8,
                "eps_obs": 2.5},
    "duration": 24.0,
    "step": 0.2,
}


def horizon_sweep(horizons=(1.0, 5.0, 10.0, 20.0), seed: int = 0) -> list:
    """Normalized cost and compute time per planning horizon (mound scene).

    The replan period is capped at half the horizon so every cycle warm
    starts; the 1 s horizon replans at 2 Hz.
    """
    rows = []
    for horizon in horizons:
        count = int(round(horizon / HORIZON_STUDY["step"])) + 1
        cfg = ScenarioConfig(
            world=dict(HORIZON_STUDY["world"]),
            actor=dict(HORIZON_STUDY["actor"]),
            shot=dict(HORIZON_STUDY["shot"]),
            weights=dict(HORIZON_STUDY["weights"]),
            planner=dict(HORIZON_STUDY["planner"]),
            duration=HORIZON_STUDY["duration"],
            plan_period=min(1.0, horizon / 2.0),
            horizon=horizon,
            grid_count=count,
            seed=seed,
        )
        metrics, _ = run_scenario(cfg)
        rows.append({
            "horizon_s": horizon,
            "normalized_cost": metrics.normalized_cost,
            "mean_cycle_cost": metrics.mean_cycle_cost,
            "median_cycle_seconds": float(np.median(metrics.cycle_times)),
            "visibility": metrics.visibility,
            "collided": int(metrics.collided),
        })
    return rows
