"""Run manifests, config loading, and deterministic output files.

Every CLI run writes a manifest (canonical config, its hash, the seed, and
the package version) alongside its outputs.  Re-running a command from its
manifest reproduces every output byte-for-byte; wall-clock measurements go
to a separate timings file that is excluded from that guarantee.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import skyshot

SCHEMA_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def load_config(path) -> dict:
    """Read a JSON or TOML config file."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        import tomllib

        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def unwrap_manifest(data: dict, command: str) -> tuple:
    """Accept either a plain config or a previously written manifest.

    Returns (config, seed_override or None).
    """
    if data.get("kind") == "manifest":
        if data.get("command") != command:
            raise ValueError(
                f"manifest was written by {data.get('command')!r}, not {command!r}"
            )
        return data["config"], data.get("seed")
    return data, None


def write_manifest(out_dir, command: str, config: dict, seed: int) -> Path:
    manifest = {
        "kind": "manifest",
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": int(seed),
        "config": config,
        "config_hash": config_hash(config),
        "version": skyshot.__version__,
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return path


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value
