"""Desk-scale artistic shot selection: episodes, training, evaluation.

An episode is five 6-second decision steps.  Each step selects a shot type
from the learned action-value function (or a baseline policy), replans with
the matching shot parameters, flies the plan, synthesizes frame samples from
the flown geometry, and scores them with the hand-crafted reward.  Frame
tilt is measured to the actor's ground position; visibility and crash checks
run against the ground-truth world.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from skyshot.artistic import (
    FrameSample,
    QFunction,
    ReplayBuffer,
    SHOT_YAWS,
    ShotContext,
    Transition,
    art_reward,
    duration_discount,
    q_update,
    select_shot,
    step_reward,
)
from skyshot.core import BoundaryCondition, CostWeights, Pose, ShotParams, TimeGrid
from skyshot.costs import shot_offset
from skyshot.forecast import ActorMeasurement
from skyshot.mapping.grid import line_of_sight
from skyshot.mapping.heightmap import HeightMap
from skyshot.mapping.sdf import signed_distance
from skyshot.planner import PlannerConfig, PlanningSession, WorldModel, _sample_path
from skyshot.seeding import rng_for
from skyshot.sim.scenario import ACTOR_EYE_HEIGHT, ActorScript
from skyshot.sim.worlds import World, gen_blockworld

PATCH_CELL = 2.5
PATCH_HALF = 4


@dataclass
class ArtConfig:
    steps: int = 5
    step_duration: float = 6.0
    frames_per_step: int = 30
    rho: float = 18.0
    tilt_rel: float = math.radians(75.0)
    horizon: float = 6.0
    grid_count: int = 16
    weights: dict = field(default_factory=lambda: {
        "lambda_obs": 30.0, "lambda_occ": 3.0, "lambda_shot": 1.0})
    planner: dict = field(default_factory=lambda: {
        "step_gain": 2.0, "max_iters": 25})
    actor_start: tuple = (2.0, 0.0)
    actor_speed: float = 1.2
    actor_height: float = 1.8
    focal_y: float = 600.0
    image_height: int = 720
    episodes: int = 300
    batch: int = 16
    buffer_capacity: int = 2000
    learning_rate: float = 0.2
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    train_seed_base: int = 10_000
    eval_seed_base: int = 90_000


def shot_context(hm: HeightMap, actor: Pose, shot_type: int, count: int) -> ShotContext:
    """Actor-centered, heading-aligned 9x9 elevation patch (relative heights)."""
    c, s = math.cos(actor.heading), math.sin(actor.heading)
    ahead = np.array([c, s])
    left = np.array([-s, c])
    base = hm.height_at(actor.position[:2])
    patch = np.empty((2 * PATCH_HALF + 1, 2 * PATCH_HALF + 1))
    for i in range(-PATCH_HALF, PATCH_HALF + 1):
        for j in range(-PATCH_HALF, PATCH_HALF + 1):
            xy = actor.position[:2] + PATCH_CELL * (i * ahead + j * left)
            patch[i + PATCH_HALF, j + PATCH_HALF] = hm.height_at(xy) - base
    return ShotContext(patch=patch, shot_type=shot_type, count=count)


def synthesize_frames(world: World, cam_positions, actor_poses, cfg: ArtConfig):
    """Frame samples plus the crash flag for one flown step."""
    frames = []
    crashed = False
    for cam, actor in zip(cam_positions, actor_poses):
        if signed_distance(world.sdf, world.grid, cam) < 0.0:
            crashed = True
        eye = actor.position + np.array([0.0, 0.0, ACTOR_EYE_HEIGHT])
        visible = line_of_sight(world.grid, cam, eye)
        delta = cam - actor.position
        horiz = math.hypot(delta[0], delta[1])
        tilt = math.degrees(math.atan2(delta[2], horiz))
        dist = float(np.linalg.norm(delta))
        presence = (
            cfg.actor_height * cfg.focal_y / (dist * cfg.image_height)
            if visible and dist > 1e-9
            else 0.0
        )
        frames.append(FrameSample(tilt_deg=tilt, presence=presence, visible=visible))
    return frames, crashed


def run_art_episode(
    world: World,
    q: QFunction,
    cfg: ArtConfig,
    rng: np.random.Generator,
    mode: str = "greedy",
    buffer: ReplayBuffer | None = None,
    train: bool = False,
):
    """Run one 5-step episode; returns rewards, actions, and crash flags.

    ``mode`` is "greedy", "explore" (epsilon-greedy), or "random".
    """
    if mode not in ("greedy", "explore", "random"):
        raise ValueError(f"unknown mode {mode!r}")
    script = ActorScript(
        {"kind": "line", "start": list(cfg.actor_start), "speed": cfg.actor_speed},
        0,
        world.hm,
    )
    tgrid = TimeGrid(cfg.horizon, cfg.grid_count)
    weights = CostWeights(**cfg.weights)

    shot_type = 3  # start from a back shot
    count = 1
    ctx = shot_context(world.hm, script.pose(0.0), shot_type, count)
    session: PlanningSession | None = None
    prev_action: int | None = None

    rewards = []
    actions = []
    crashes = []
    frame_dt = cfg.step_duration / cfg.frames_per_step

    for step in range(cfg.steps):
        now = step * cfg.step_duration
        if mode == "random":
            action = int(rng.integers(len(SHOT_YAWS)))
        else:
            action = select_shot(q, ctx, explore=(mode == "explore"), rng=rng)
        omega = ShotParams(cfg.rho, SHOT_YAWS[action], cfg.tilt_rel)
        pcfg = PlannerConfig(weights=weights, shot=omega, **cfg.planner)

        actor_now = script.pose(now)
        if session is None:
            uav0 = actor_now.position + shot_offset(actor_now.heading, omega)
            session = PlanningSession(pcfg, tgrid, BoundaryCondition(uav0), "person")
        else:
            session.cfg = pcfg
        measurement = ActorMeasurement(now, actor_now.position, actor_now.heading)
        result = session.plan_cycle(
            [measurement], WorldModel(world.sdf, world.grid, world.hm), now
        )

        path = np.vstack([result.bc.position, result.trajectory.waypoints])
        sample_times = [(i + 1) * frame_dt for i in range(cfg.frames_per_step)]
        cams = [_sample_path(path, tgrid.step, t) for t in sample_times]
        actors = [script.pose(now + t) for t in sample_times]
        frames, crashed = synthesize_frames(world, cams, actors, cfg)

        count = count + 1 if action == prev_action else 1
        reward = art_reward(step_reward(frames), duration_discount(count), crashed)
        next_ctx = shot_context(
            world.hm, script.pose(now + cfg.step_duration), action, count
        )
        if buffer is not None:
            buffer.add(Transition(ctx, action, reward, next_ctx,
                                  terminal=(step == cfg.steps - 1)))
        if train and buffer is not None:
            q_update(q, buffer, cfg.batch, rng)

        rewards.append(reward)
        actions.append(action)
        crashes.append(crashed)
        ctx = next_ctx
        prev_action = action

    return {"rewards": rewards, "actions": actions, "crashes": crashes}


def train_policy(cfg: ArtConfig, seed: int = 0):
    """Train the shot selector on seeded random blockworlds.

    Returns (QFunction, per-episode mean reward history).
    """
    q = QFunction(cfg.learning_rate, cfg.gamma, cfg.epsilon_start)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    rng = rng_for(seed, "art-train")
    history = []
    for episode in range(cfg.episodes):
        frac = episode / max(cfg.episodes - 1, 1)
        q.epsilon = cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)
        world = gen_blockworld(None, cfg.train_seed_base + episode)
        outcome = run_art_episode(world, q, cfg, rng, mode="explore",
                                  buffer=buffer, train=True)
        history.append(float(np.mean(outcome["rewards"])))
    q.epsilon = cfg.epsilon_end
    return q, history


def evaluate_policy(q: QFunction | None, cfg: ArtConfig, seeds, mode: str = "greedy"):
    """Mean per-step reward of a policy over held-out blockworld seeds."""
    rewards = []
    for seed in seeds:
        world = gen_blockworld(None, seed)
        rng = rng_for(seed, "art-eval")
        outcome = run_art_episode(world, q if q is not None else QFunction(),
                                  cfg, rng, mode=mode)
        rewards.extend(outcome["rewards"])
    return float(np.mean(rewards))
