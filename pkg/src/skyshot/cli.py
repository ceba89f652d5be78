"""Command-line entry point.

Every run resolves its full effective config (file + flags), writes it into
a manifest together with the seed and the package version, then produces
deterministic outputs in the output directory.  Wall-clock measurements go
to a separate ``timings.csv``; re-running a command from its manifest
reproduces every other file byte for byte.

The default output directory is ``skyshot-out``, overridable with the
``SKYSHOT_OUT`` environment variable.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from skyshot import runio
from skyshot.artistic import QFunction
from skyshot.mapping.io import write_grid_csv, write_pgm
from skyshot.sim.episodes import ArtConfig, evaluate_policy, train_policy
from skyshot.sim.scenario import ScenarioConfig, run_scenario

DEFAULT_OUT = os.environ.get("SKYSHOT_OUT", "skyshot-out")


def _fail(message: str, code: int = 1):
    click.echo(json.dumps({"error": message}), err=True)
    sys.exit(code)


def _load(command: str, config_path):
    """Read a config file or manifest; returns (config dict, manifest seed)."""
    if config_path is None:
        return {}, None
    try:
        data = runio.load_config(config_path)
        return runio.unwrap_manifest(data, command)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        _fail(f"invalid config: {exc}", code=2)


def _start(command: str, config: dict, out, seed):
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    runio.write_manifest(out_dir, command, config, seed)
    return out_dir


def _resolve_seed(cli_seed, manifest_seed, config):
    if cli_seed is not None:
        return int(cli_seed)
    if manifest_seed is not None:
        return int(manifest_seed)
    return int(config.get("seed", 0))


@click.group()
def main():
    """Benchmark harness for the camera trajectory planner."""


@main.command("grad-check")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", default=DEFAULT_OUT, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--instances", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
def grad_check_cmd(config_path, out, seed, instances, fmt):
    """Max relative gradient error per cost term vs central differences."""
    from skyshot.bench import gradient_check

    config, mseed = _load("grad-check", config_path)
    seed = _resolve_seed(seed, mseed, config)
    if instances is not None:
        config["instances"] = instances
    config.setdefault("instances", 20)
    config["format"] = fmt
    out_dir = _start("grad-check", config, out, seed)
    try:
        errors = gradient_check(seed=seed, instances=config["instances"])
    except Exception as exc:
        _fail(f"grad-check failed: {exc}")
    payload = {"seed": seed, "instances": config["instances"],
               "max_relative_error": errors}
    if fmt == "json":
        runio.write_json(out_dir / "grad_check.json", payload)
    else:
        runio.write_csv(out_dir / "grad_check.csv", ["term", "max_relative_error"],
                        sorted(errors.items()))
    click.echo(json.dumps(payload, sort_keys=True))


@main.command("map-bench")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", default=DEFAULT_OUT, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--size", type=int, default=None)
@click.option("--rays", type=int, default=None)
def map_bench_cmd(config_path, out, seed, size, rays):
    """Incremental distance field vs from-scratch rebuild on random rays."""
    from skyshot.bench import map_bench

    config, mseed = _load("map-bench", config_path)
    seed = _resolve_seed(seed, mseed, config)
    if size is not None:
        config["size"] = size
    if rays is not None:
        config["rays"] = rays
    config.setdefault("size", 32)
    config.setdefault("rays", 100)
    out_dir = _start("map-bench", config, out, seed)
    try:
        report = map_bench(seed=seed, size=config["size"], rays=config["rays"])
    except Exception as exc:
        _fail(f"map-bench failed: {exc}")
    timing = {k: report.pop(k) for k in ("incremental_seconds", "rebuild_seconds")}
    runio.write_json(out_dir / "map_bench.json", {"seed": seed, **report})
    runio.write_csv(out_dir / "timings.csv", ["metric", "seconds"],
                    sorted(timing.items()))
    click.echo(json.dumps({"seed": seed, **report, **timing}, sort_keys=True))


@main.command("plan-bench")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--preset", type=click.Choice(["occlusion", "horizon", "scenario"]),
              default=None)
@click.option("--out", default=DEFAULT_OUT, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--seeds", "seed_count", type=int, default=None,
              help="Number of scenario seeds for the occlusion study.")
@click.option("--jobs", type=int, default=1, show_default=True)
def plan_bench_cmd(config_path, preset, out, seed, seed_count, jobs):
    """Planner studies: occlusion ablation, horizon sweep, or one scenario."""
    from skyshot.bench import horizon_sweep, occlusion_study

    config, mseed = _load("plan-bench", config_path)
    seed = _resolve_seed(seed, mseed, config)
    if preset is not None:
        config["preset"] = preset
    config.setdefault("preset", "scenario")
    if seed_count is not None:
        config["seeds"] = seed_count
    out_dir = _start("plan-bench", config, out, seed)
    preset = config["preset"]
    try:
        if preset == "occlusion":
            n = config.get("seeds", 30)
            levels = tuple(config.get("clutter_levels", (1, 10, 20)))
            rows = occlusion_study(range(seed, seed + n), levels, jobs=jobs)
            runio.write_csv(
                out_dir / "occlusion_study.csv",
                ["clutter", "costs", "seed", "visibility", "shot_distance",
                 "collided"],
                [[r[k] for k in ("clutter", "costs", "seed", "visibility",
                                 "shot_distance", "collided")] for r in rows],
            )
            summary = {}
            for row in rows:
                key = f"clutter{row['clutter']}_{row['costs']}"
                summary.setdefault(key, []).append(row["visibility"])
            payload = {k: float(np.mean(v)) for k, v in summary.items()}
            runio.write_json(out_dir / "summary.json", payload)
            click.echo(json.dumps(payload, sort_keys=True))
        elif preset == "horizon":
            horizons = tuple(config.get("horizons", (1.0, 5.0, 10.0, 20.0)))
            rows = horizon_sweep(horizons, seed=seed)
            runio.write_csv(
                out_dir / "horizon_sweep.csv",
                ["horizon_s", "normalized_cost", "mean_cycle_cost", "visibility",
                 "collided"],
                [[r["horizon_s"], r["normalized_cost"], r["mean_cycle_cost"],
                  r["visibility"], r["collided"]] for r in rows],
            )
            runio.write_csv(
                out_dir / "timings.csv",
                ["horizon_s", "median_cycle_seconds"],
                [[r["horizon_s"], r["median_cycle_seconds"]] for r in rows],
            )
            summary = [
                {k: r[k] for k in ("horizon_s", "normalized_cost")} for r in rows
            ]
            click.echo(json.dumps(summary, sort_keys=True))
        else:
            scenario = ScenarioConfig.from_dict(config.get("scenario", {}))
            scenario.seed = seed
            metrics, trace = run_scenario(scenario)
            runio.write_json(out_dir / "trace.json", trace)
            runio.write_csv(
                out_dir / "cycles.csv",
                ["t", "smooth", "obstacle", "occlusion", "shot", "total",
                 "iterations"],
                [[c["t"], c["costs"]["smooth"], c["costs"]["obstacle"],
                  c["costs"]["occlusion"], c["costs"]["shot"],
                  c["costs"]["total"], c["iterations"]] for c in trace["cycles"]],
            )
            runio.write_csv(out_dir / "timings.csv", ["cycle", "seconds"],
                            list(enumerate(metrics.cycle_times)))
            click.echo(json.dumps(trace["metrics"], sort_keys=True))
    except Exception as exc:
        _fail(f"plan-bench failed: {exc}")


def _art_config(config: dict) -> ArtConfig:
    known = set(ArtConfig.__dataclass_fields__)
    return ArtConfig(**{k: v for k, v in config.items() if k in known})


@main.command("art-train")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", default=DEFAULT_OUT, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--episodes", type=int, default=None)
def art_train_cmd(config_path, out, seed, episodes):
    """Train the shot-selection policy on seeded blockworlds."""
    config, mseed = _load("art-train", config_path)
    seed = _resolve_seed(seed, mseed, config)
    if episodes is not None:
        config["episodes"] = episodes
    out_dir = _start("art-train", config, out, seed)
    try:
        cfg = _art_config(config)
        q, history = train_policy(cfg, seed=seed)
    except Exception as exc:
        _fail(f"art-train failed: {exc}")
    q.save(out_dir / "qfunction.json")
    runio.write_csv(out_dir / "episode_rewards.csv", ["episode", "mean_reward"],
                    list(enumerate(history)))
    payload = {"episodes": len(history),
               "final_mean_reward": float(np.mean(history[-20:]))}
    click.echo(json.dumps(payload, sort_keys=True))


@main.command("art-eval")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--params", type=click.Path(exists=True), default=None)
@click.option("--out", default=DEFAULT_OUT, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--seeds", "seed_count", type=int, default=None)
def art_eval_cmd(config_path, params, out, seed, seed_count):
    """Greedy trained policy vs uniform-random policy on held-out worlds."""
    config, mseed = _load("art-eval", config_path)
    seed = _resolve_seed(seed, mseed, config)
    if params is not None:
        config["params"] = str(params)
    if seed_count is not None:
        config["eval_seeds"] = seed_count
    config.setdefault("eval_seeds", 50)
    out_dir = _start("art-eval", config, out, seed)
    try:
        cfg = _art_config(config)
        n = config["eval_seeds"]
        held_out = [cfg.eval_seed_base + seed + k for k in range(n)]
        q = QFunction.load(config["params"]) if config.get("params") else None
        trained = (evaluate_policy(q, cfg, held_out, mode="greedy")
                   if q is not None else None)
        random_mean = evaluate_policy(None, cfg, held_out, mode="random")
    except Exception as exc:
        _fail(f"art-eval failed: {exc}")
    payload = {"random_mean_reward": random_mean, "eval_seeds": n}
    if trained is not None:
        payload["trained_mean_reward"] = trained
        payload["margin"] = trained - random_mean
    runio.write_json(out_dir / "art_eval.json", payload)
    click.echo(json.dumps(payload, sort_keys=True))


@main.command("replay-export")
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True)
@click.option("--out", default=DEFAULT_OUT, show_default=True)
def replay_export_cmd(trace_path, out):
    """Re-render a trace file as CSV tables and PGM world views."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        trace = json.loads(Path(trace_path).read_text())
        cycles = trace["cycles"]
        runio.write_csv(
            out_dir / "path.csv",
            ["t", "uav_x", "uav_y", "uav_z", "actor_x", "actor_y", "actor_z"],
            [[c["t"], *c["uav"], *c["actor"]] for c in cycles],
        )
        runio.write_csv(
            out_dir / "costs.csv",
            ["t", "smooth", "obstacle", "occlusion", "shot", "total"],
            [[c["t"], c["costs"]["smooth"], c["costs"]["obstacle"],
              c["costs"]["occlusion"], c["costs"]["shot"], c["costs"]["total"]]
             for c in cycles],
        )
        from skyshot.sim.scenario import build_world

        config = trace.get("config", {})
        world = build_world(config.get("world", {"kind": "empty"}),
                            config.get("seed", 0))
        heights = world.hm.means
        write_pgm(out_dir / "heightmap.pgm", heights.T)
        write_grid_csv(out_dir / "heightmap.csv", heights)
        mid = world.grid.spec.dims[2] // 2
        write_pgm(out_dir / "sdf_slice.pgm", world.sdf.magnitude[:, :, mid].T)
        write_grid_csv(out_dir / "sdf_slice.csv", world.sdf.magnitude[:, :, mid])
    except Exception as exc:
        _fail(f"replay-export failed: {exc}")
    click.echo(json.dumps({"exported": str(out_dir)}, sort_keys=True))


if __name__ == "__main__":
    main()
