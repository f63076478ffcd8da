"""Run manifests, file hashing and the seed-splitting scheme."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

LAYOUT = ("policies", "beliefs", "reports", "curves")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def derive_seed(seed: int, *labels: str | int) -> int:
    """Child seed for a named sub-task.

    The labels are hashed into extra entropy words for a numpy SeedSequence
    rooted at the top-level seed, so every sub-task's stream depends only on
    (seed, labels) and never on how many other tasks ran first.
    """
    words = [int.from_bytes(hashlib.sha256(str(l).encode()).digest()[:4], "big") for l in labels]
    return int(np.random.SeedSequence([seed, *words]).generate_state(1)[0])


def prepare_out(out: str | Path) -> Path:
    root = Path(out)
    for sub in LAYOUT:
        (root / sub).mkdir(parents=True, exist_ok=True)
    return root


@dataclass
class RunManifest:
    command: str
    argv: list
    env_config_hash: str | None = None
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: dict = field(default_factory=dict)  # path (relative to out) -> sha256
    started: float = field(default_factory=time.time)
    wall_clock: float = 0.0
    extra: dict = field(default_factory=dict)

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, root: Path, path: str | Path) -> None:
        p = Path(path)
        self.outputs[str(p.resolve().relative_to(root.resolve()))] = sha256_file(p)

    def write(self, root: Path) -> Path:
        self.wall_clock = time.time() - self.started
        data = {
            "command": self.command,
            "argv": self.argv,
            "env_config_hash": self.env_config_hash,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "outputs": dict(sorted(self.outputs.items())),
            "wall_clock_seconds": round(self.wall_clock, 3),
            "tool_version": __version__,
            **self.extra,
        }
        path = root / "manifest.json"
        path.write_text(json.dumps(data, indent=2, sort_keys=True))
        return path


def check_manifest(root: str | Path) -> list[str]:
    """Paths whose recorded hash no longer matches the file on disk."""
    root = Path(root)
    data = json.loads((root / "manifest.json").read_text())
    bad = []
    for rel, digest in data["outputs"].items():
        p = root / rel
        if not p.exists() or sha256_file(p) != digest:
            bad.append(rel)
    return bad
