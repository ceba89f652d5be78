"""Deterministic scenario generation, synthetic sensing, and benchmark runs."""

from skyshot.sim.worlds import World, gen_blockworld, gen_mound_world, gen_sphere_world
from skyshot.sim.lidar import ScanPattern, simulate_lidar
from skyshot.sim.scenario import RunMetrics, ScenarioConfig, run_scenario
from skyshot.sim.episodes import (
    ArtConfig,
    evaluate_policy,
    run_art_episode,
    train_policy,
)

__all__ = [
    "World",
    "gen_blockworld",
    "gen_mound_world",
    "gen_sphere_world",
    "ScanPattern",
    "simulate_lidar",
    "RunMetrics",
    "ScenarioConfig",
    "run_scenario",
    "ArtConfig",
    "evaluate_policy",
    "run_art_episode",
    "train_policy",
]
