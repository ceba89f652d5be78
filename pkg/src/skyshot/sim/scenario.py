"""Closed-loop scenario execution and the metrics it reports.

A scenario steps a scripted actor, optionally ingests simulated LiDAR into
an online map, replans at a fixed period, and "flies" each plan until the
next cycle.  Metrics are judged against the ground-truth world: actor
visibility by voxel line of sight (aimed at head height), collision by the
signed distance of traversed waypoints, plus the mean distance to the
desired shot path and per-cycle normalized cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from skyshot.core import (
    BoundaryCondition,
    CostWeights,
    Pose,
    ShotParams,
    TimeGrid,
)
from skyshot.costs import shot_offset
from skyshot.forecast import ActorMeasurement
from skyshot.mapping.grid import OccupancyGrid, line_of_sight
from skyshot.mapping.heightmap import HeightMap
from skyshot.mapping.sdf import SignedDistanceField, ingest_scan, signed_distance
from skyshot.planner import PlannerConfig, PlanningSession, WorldModel
from skyshot.seeding import rng_for
from skyshot.sim.lidar import ScanPattern, simulate_lidar
from skyshot.sim.worlds import (
    BlockWorldParams,
    World,
    gen_blockworld,
    gen_mound_world,
    gen_sphere_world,
)

ACTOR_EYE_HEIGHT = 1.0

SCHEMA_VERSION = 1


@dataclass
class ScenarioConfig:
    """One reproducible run; the seed fully determines the outcome."""

    world: dict = field(default_factory=lambda: {"kind": "spheres", "count": 20})
    actor: dict = field(default_factory=lambda: {
        "kind": "line", "start": [-18.0, 0.0], "heading": 0.0, "speed": 1.2})
    actor_kind: str = "person"
    seed: int = 0
    duration: float = 20.0
    plan_period: float = 1.0
    horizon: float = 10.0
    grid_count: int = 51
    shot: dict = field(default_factory=lambda: {
        "rho": 12.0, "psi_rel": math.pi / 2.0, "theta_rel": math.radians(75.0)})
    weights: dict = field(default_factory=lambda: {
        "lambda_obs": 30.0, "lambda_occ": 3.0, "lambda_shot": 1.0})
    planner: dict = field(default_factory=lambda: {
        "step_gain": 2.0, "max_iters": 30})
    measurement_noise: float = 0.0
    online_mapping: bool = False
    lidar: dict = field(default_factory=dict)
    collect_waypoints: bool = False

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "world": dict(self.world),
            "actor": dict(self.actor),
            "actor_kind": self.actor_kind,
            "seed": self.seed,
            "duration": self.duration,
            "plan_period": self.plan_period,
            "horizon": self.horizon,
            "grid_count": self.grid_count,
            "shot": dict(self.shot),
            "weights": dict(self.weights),
            "planner": dict(self.planner),
            "measurement_noise": self.measurement_noise,
            "online_mapping": self.online_mapping,
            "lidar": dict(self.lidar),
            "collect_waypoints": self.collect_waypoints,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported scenario schema version {version}")
        return cls(**data)


@dataclass(frozen=True)
class RunMetrics:
    visibility: float
    mean_shot_distance: float
    mean_cycle_cost: float
    normalized_cost: float
    cycle_times: tuple
    collided: bool
    cycles: int


def build_world(world_cfg: dict, seed: int) -> World:
    kind = world_cfg.get("kind", "spheres")
    if kind in ("spheres", "empty"):
        count = 0 if kind == "empty" else int(world_cfg.get("count", 20))
        kwargs = {
            k: world_cfg[k]
            for k in ("box", "height", "radius_range", "center_z_range",
                      "center_x_range", "corridor_half_width", "camera_track",
                      "truncation", "voxel_size")
            if k in world_cfg
        }
        for key in ("radius_range", "center_z_range", "center_x_range",
                    "camera_track"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return gen_sphere_world(count, seed, **kwargs)
    if kind == "blocks":
        params = BlockWorldParams(**world_cfg.get("params", {}))
        return gen_blockworld(params, seed,
                              truncation=world_cfg.get("truncation", 10.0))
    if kind == "mound":
        return gen_mound_world(
            seed,
            mound_height=world_cfg.get("height", 8.0),
            mound_sigma=world_cfg.get("sigma", 6.0),
            truncation=world_cfg.get("truncation", 10.0),
        )
    raise ValueError(f"unknown world kind {kind!r}")


class ActorScript:
    """Arc-length parametrized ground path with terrain-following z."""

    def __init__(self, actor_cfg: dict, seed: int, hm: HeightMap):
        kind = actor_cfg.get("kind", "line")
        speed = float(actor_cfg.get("speed", 1.2))
        if kind == "line":
            start = np.asarray(actor_cfg.get("start", [-18.0, 0.0]), dtype=float)
            heading = float(actor_cfg.get("heading", 0.0))
            reach = speed * 10000.0 + 1.0
            points = np.stack(
                [start, start + reach * np.array([math.cos(heading), math.sin(heading)])]
            )
        elif kind == "polyline":
            points = np.asarray(actor_cfg["points"], dtype=float).reshape(-1, 2)
        elif kind == "random_walk":
            rng = rng_for(seed, "actor-walk")
            start = np.asarray(actor_cfg.get("start", [0.0, 0.0]), dtype=float)
            steps = int(actor_cfg.get("steps", 12))
            leg = float(actor_cfg.get("leg", 6.0))
            heading = float(actor_cfg.get("heading", 0.0))
            pts = [start]
            for _ in range(steps):
                heading += rng.uniform(-0.8, 0.8)
                pts.append(pts[-1] + leg * np.array([math.cos(heading), math.sin(heading)]))
            points = np.stack(pts)
        else:
            raise ValueError(f"unknown actor kind {kind!r}")
        if len(points) < 2:
            raise ValueError("actor path needs at least two points")
        self.points = points
        self.speed = speed
        self.hm = hm
        seg = np.diff(points, axis=0)
        self.seg_len = np.linalg.norm(seg, axis=1)
        self.cum = np.concatenate([[0.0], np.cumsum(self.seg_len)])

    def pose(self, t: float) -> Pose:
        s = min(max(self.speed * t, 0.0), float(self.cum[-1]) - 1e-9)
        i = int(np.searchsorted(self.cum, s, side="right") - 1)
        i = min(i, len(self.seg_len) - 1)
        f = (s - self.cum[i]) / max(self.seg_len[i], 1e-12)
        xy = (1.0 - f) * self.points[i] + f * self.points[i + 1]
        direction = self.points[i + 1] - self.points[i]
        heading = math.atan2(direction[1], direction[0])
        z = self.hm.height_at(xy)
        return Pose(np.array([xy[0], xy[1], z]), heading)


def run_scenario(cfg: ScenarioConfig):
    """Execute one scenario; returns (RunMetrics, trace dict)."""
    world = build_world(cfg.world, cfg.seed)
    script = ActorScript(cfg.actor, cfg.seed, world.hm)
    tgrid = TimeGrid(cfg.horizon, cfg.grid_count)
    omega = ShotParams(**cfg.shot)
    weights = CostWeights(**cfg.weights)
    pcfg = PlannerConfig(weights=weights, shot=omega, **cfg.planner)

    actor0 = script.pose(0.0)
    uav0 = actor0.position + shot_offset(actor0.heading, omega)
    # takeoff at the first clear altitude at or above the desired shot point
    top = world.grid.spec.upper[2] - 1.0
    while signed_distance(world.sdf, world.grid, uav0) < 1.0 and uav0[2] < top:
        uav0 = uav0 + np.array([0.0, 0.0, 1.0])
    session = PlanningSession(pcfg, tgrid, BoundaryCondition(uav0), cfg.actor_kind)

    if cfg.online_mapping:
        online_grid = OccupancyGrid(world.grid.spec)
        online_sdf = SignedDistanceField(
            world.grid.spec, truncation=world.sdf.truncation
        )
        online_hm = HeightMap(
            world.grid.spec.dims[:2],
            origin=world.grid.spec.origin[:2],
            cell_size=world.grid.spec.voxel_size,
        )
        planner_world = WorldModel(online_sdf, online_grid, online_hm)
        pattern = ScanPattern(**cfg.lidar) if cfg.lidar else ScanPattern()
    else:
        planner_world = WorldModel(world.sdf, world.grid, world.hm)
        pattern = None

    noise_rng = rng_for(cfg.seed, "measurement-noise")
    steps_per_cycle = max(1, round(cfg.plan_period / tgrid.step))

    visible_count = 0
    total_count = 0
    shot_dist_sum = 0.0
    cost_sum = 0.0
    cycle_times = []
    collided = False
    cycles = []
    uav_position = uav0

    n_cycles = max(1, int(round(cfg.duration / cfg.plan_period)))
    for k in range(n_cycles):
        now = k * cfg.plan_period
        true_pose = script.pose(now)
        meas = true_pose.position.copy()
        if cfg.measurement_noise > 0:
            meas[:2] += noise_rng.normal(0.0, cfg.measurement_noise, 2)
        measurement = ActorMeasurement(time=now, position=meas,
                                       heading=true_pose.heading)

        if cfg.online_mapping:
            points, hits = simulate_lidar(world.grid, uav_position, pattern)
            ingest_scan(online_grid, online_sdf, uav_position, points, hits)
            online_hm.add_hits(points[hits])

        result = session.plan_cycle([measurement], planner_world, now)
        cycle_times.append(result.wall_time)
        cost_sum += result.report.total

        flown = result.trajectory.waypoints[:steps_per_cycle]
        for j, wp in enumerate(flown):
            tj = now + (j + 1) * tgrid.step
            ap = script.pose(tj)
            eye = ap.position + np.array([0.0, 0.0, ACTOR_EYE_HEIGHT])
            if line_of_sight(world.grid, wp, eye):
                visible_count += 1
            total_count += 1
            shot_point = ap.position + shot_offset(ap.heading, omega)
            shot_dist_sum += float(np.linalg.norm(wp - shot_point))
            if signed_distance(world.sdf, world.grid, wp) < 0.0:
                collided = True
        uav_position = flown[-1]

        entry = {
            "t": now,
            "actor": true_pose.position.tolist(),
            "uav": uav_position.tolist(),
            "costs": result.report.as_dict(),
            "iterations": result.iterations,
        }
        if cfg.collect_waypoints:
            entry["waypoints"] = result.trajectory.waypoints.tolist()
        cycles.append(entry)

    metrics = RunMetrics(
        visibility=visible_count / max(total_count, 1),
        mean_shot_distance=shot_dist_sum / max(total_count, 1),
        mean_cycle_cost=cost_sum / n_cycles,
        normalized_cost=cost_sum / n_cycles / cfg.horizon,
        cycle_times=tuple(cycle_times),
        collided=collided,
        cycles=n_cycles,
    )
    trace = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "cycles": cycles,
        "metrics": {
            "visibility": metrics.visibility,
            "mean_shot_distance": metrics.mean_shot_distance,
            "mean_cycle_cost": metrics.mean_cycle_cost,
            "normalized_cost": metrics.normalized_cost,
            "collided": metrics.collided,
            "cycles": metrics.cycles,
        },
    }
    return metrics, trace
