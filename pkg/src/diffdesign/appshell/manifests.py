"""Run manifests: enough provenance to re-execute any run deterministically."""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field


@dataclass
class RunManifest:
    command: str
    args: dict
    seed: int | None = None
    config: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    wall_clock_s: float | None = None
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    created_at: float = field(default_factory=time.time)

    def to_json(self):
        return {
            "run_id": self.run_id,
            "command": self.command,
            "args": self.args,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "metrics": self.metrics,
            "wall_clock_s": self.wall_clock_s,
            "created_at": self.created_at,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
        return path


def load_manifest(path) -> RunManifest:
    with open(path) as fh:
        doc = json.load(fh)
    m = RunManifest(doc["command"], doc["args"], doc.get("seed"), doc.get("config") or {})
    m.inputs = doc.get("inputs") or {}
    m.outputs = doc.get("outputs") or {}
    m.metrics = doc.get("metrics") or {}
    m.wall_clock_s = doc.get("wall_clock_s")
    m.run_id = doc["run_id"]
    m.created_at = doc.get("created_at", 0.0)
    return m


def replay_manifest(path, out_dir):
    """Re-run the manifest's command with its stored args, redirecting outputs.

    Returns the new manifest; output files land under out_dir with the same
    basenames, so callers can compare them byte-for-byte with the originals.
    """
    from . import runs

    m = load_manifest(path)
    return runs.dispatch(m.command, dict(m.args), out_dir)
