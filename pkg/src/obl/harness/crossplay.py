"""Cross-play matrices: player 0 from policy i, every other seat from policy j."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..env.base import DecPomdp
from ..policy import Policy, combine
from ..rollout import make_rng, play_episode, spawn_seeds


class ConfigMismatchError(ValueError):
    pass


@dataclass
class CrossPlayMatrix:
    labels: list[str]
    values: np.ndarray
    stderr: np.ndarray
    mode: str  # "exact" or "sampled"
    episodes: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.values)

    def off_diagonal(self) -> np.ndarray:
        n = len(self.labels)
        return self.values[~np.eye(n, dtype=bool)]

    def sp_mean(self) -> float:
        return float(self.diagonal.mean())

    def xp_mean(self) -> float:
        off = self.off_diagonal()
        return float(off.mean()) if off.size else float("nan")

    def to_json(self) -> dict:
        return {
            "labels": self.labels,
            "values": self.values.tolist(),
            "stderr": self.stderr.tolist(),
            "mode": self.mode,
            "episodes": self.episodes,
            "meta": self.meta,
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True))

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([""] + self.labels)
            for lab, row in zip(self.labels, self.values):
                w.writerow([lab] + [repr(float(v)) for v in row])

    def render(self, digits: int = 2) -> str:
        width = max(8, max(len(l) for l in self.labels) + 1)
        lines = [" " * width + "".join(f"{l:>{width}}" for l in self.labels)]
        for lab, row in zip(self.labels, self.values):
            lines.append(f"{lab:<{width}}" + "".join(f"{v:>{width}.{digits}f}" for v in row))
        lines.append(f"SP mean {self.sp_mean():.4f}   XP mean {self.xp_mean():.4f}   ({self.mode})")
        return "\n".join(lines)


def check_policies(env: DecPomdp, policies: list[Policy]) -> None:
    want = env.config_hash()
    for pol in policies:
        got = pol.metadata.get("env_config_hash")
        if got is not None and got != want:
            raise ConfigMismatchError(
                f"policy {pol.metadata.get('generator')} was built for env {got}, not {want}"
            )


def pair(i_policy: Policy, j_policy: Policy, n_players: int) -> Policy:
    return combine({0: i_policy, **{p: j_policy for p in range(1, n_players)}})


def crossplay(
    env: DecPomdp,
    policies: list[Policy],
    mode: str = "exact",
    episodes: int = 10_000,
    seed: int = 0,
    labels: list[str] | None = None,
    tree=None,
) -> CrossPlayMatrix:
    """Mean return of every (i, j) pairing; the diagonal is self-play."""
    from ..solver.exact import get_tree, policy_value

    if mode not in ("exact", "sampled"):
        raise ValueError(f"unknown crossplay mode {mode!r}")
    check_policies(env, policies)
    n = len(policies)
    labels = labels or [p.metadata.get("label") or f"{p.metadata.get('generator', 'pi')}#{k}" for k, p in enumerate(policies)]
    values = np.zeros((n, n))
    stderr = np.zeros((n, n))
    if mode == "exact":
        tree = get_tree(env, tree)
        for i in range(n):
            for j in range(n):
                values[i, j] = policy_value(env, pair(policies[i], policies[j], env.n_players), tree)[0]
        return CrossPlayMatrix(labels, values, stderr, mode)
    seeds = spawn_seeds(seed, n * n)
    for i in range(n):
        for j in range(n):
            rng = make_rng(seeds[i * n + j])
            joint = pair(policies[i], policies[j], env.n_players)
            totals = np.array([play_episode(env, joint, rng).total for _ in range(episodes)])
            values[i, j] = totals.mean()
            stderr[i, j] = totals.std(ddof=1) / math.sqrt(episodes) if episodes > 1 else 0.0
    return CrossPlayMatrix(labels, values, stderr, mode, episodes, {"seed": seed})
