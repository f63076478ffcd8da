"""Tabular policies and Q tables keyed by action-observation histories."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .env.base import Aoh

log = logging.getLogger(__name__)

POLICY_FORMAT = "obl-policy"
QTABLE_FORMAT = "obl-qtable"
FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def softmax_policy(q: Sequence[float], temperature: float) -> np.ndarray:
    """Softmax over ``q`` at ``temperature``; T=0 is argmax with lowest-index ties."""
    q = np.asarray(q, dtype=float)
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        out = np.zeros(len(q))
        out[int(np.argmax(q))] = 1.0
        return out
    z = (q - q.max()) / temperature
    w = np.exp(z)
    return w / w.sum()


def argmax_ties(q: Sequence[float], tol: float = 1e-12) -> list[int]:
    best = max(q)
    return [i for i, v in enumerate(q) if v >= best - tol]


@dataclass
class Policy:
    """Map from AOH to a distribution over that AOH's legal actions.

    AOHs missing from the table fall back to uniform over the legal actions
    the caller passes in. For ``generator == "uniform"`` that is the whole
    policy; for anything else the fallback is logged once per AOH.
    """

    table: dict[Aoh, dict[int, float]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.metadata.setdefault("generator", "custom")
        self._warned: set = set()

    @classmethod
    def uniform(cls) -> "Policy":
        return cls({}, {"generator": "uniform"})

    @property
    def generator(self) -> str:
        return self.metadata["generator"]

    def probs(self, aoh: Aoh, legal: Sequence[int]) -> list[float]:
        row = self.table.get(aoh)
        if row is None:
            if self.generator != "uniform" and aoh not in self._warned:
                self._warned.add(aoh)
                log.debug("policy %s: uniform fallback at unseen AOH (t=%d)", self.generator, aoh.t)
            n = len(legal)
            return [1.0 / n] * n
        return [row.get(a, 0.0) for a in legal]

    def prob(self, aoh: Aoh, action: int, legal: Sequence[int]) -> float:
        return self.probs(aoh, legal)[list(legal).index(action)]

    def __contains__(self, aoh: Aoh) -> bool:
        return aoh in self.table

    def __len__(self) -> int:
        return len(self.table)

    # -- construction helpers ----------------------------------------------
    @classmethod
    def from_function(cls, tree, fn: Callable, generator: str = "custom") -> "Policy":
        """Tabulate ``fn(aoh, legal) -> action | {action: prob}`` on every acting AOH of ``tree``."""
        table = {}
        for h, nodes in tree.groups.items():
            legal = tree.nodes[nodes[0]].legal
            out = fn(h, legal)
            table[h] = dict(out) if isinstance(out, Mapping) else {out: 1.0}
        return cls(table, {"generator": generator})

    def restricted(self, player: int) -> dict[Aoh, dict[int, float]]:
        return {h: row for h, row in self.table.items() if h.player == player}

    # -- persistence -------------------------------------------------------
    def to_json(self) -> dict:
        entries = sorted(
            ({"aoh": h.key(), "probs": [[a, row[a]] for a in sorted(row)]} for h, row in self.table.items()),
            key=lambda e: e["aoh"],
        )
        return {
            "format": POLICY_FORMAT,
            "version": FORMAT_VERSION,
            "metadata": self.metadata,
            "entries": entries,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    def digest(self) -> str:
        if self.generator == "uniform" and not self.table:
            return "uniform"
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:16]

    @classmethod
    def from_json(cls, data: dict) -> "Policy":
        if data.get("format") != POLICY_FORMAT:
            raise FormatError(f"not a policy file (format={data.get('format')!r})")
        if data.get("version") != FORMAT_VERSION:
            raise FormatError(f"policy file version {data.get('version')} != {FORMAT_VERSION}")
        table = {Aoh.from_key(e["aoh"]): {int(a): float(p) for a, p in e["probs"]} for e in data["entries"]}
        return cls(table, dict(data.get("metadata", {})))

    @classmethod
    def load(cls, path: str | Path) -> "Policy":
        return cls.from_json(json.loads(Path(path).read_text()))


def combine(by_player: Mapping[int, Policy], metadata: dict | None = None) -> Policy:
    """Joint policy that uses ``by_player[p]`` for player p's AOHs."""
    table = {}
    for p, pol in by_player.items():
        table.update(pol.restricted(p))
    meta = metadata or {
        "generator": "combined",
        "parts": {str(p): pol.metadata.get("label", pol.generator) for p, pol in by_player.items()},
    }
    return Policy(table, meta)


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    return 0.5 * float(sum(abs(a - b) for a, b in zip(p, q)))


def policy_distance(a: Policy, b: Policy, aohs=None, legal: Mapping | None = None) -> float:
    """Max per-AOH total-variation distance over ``aohs`` (default: union of both tables)."""
    keys = set(a.table) | set(b.table) if aohs is None else aohs
    worst = 0.0
    for h in keys:
        if legal is not None:
            acts = legal[h]
        else:
            acts = sorted(set(a.table.get(h, {})) | set(b.table.get(h, {})))
        worst = max(worst, total_variation(a.probs(h, acts), b.probs(h, acts)))
    return worst


@dataclass
class QTable:
    """Expected-return estimates keyed by (acting AOH, action)."""

    values: dict[Aoh, dict[int, float]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def q(self, aoh: Aoh, action: int, default: float = 0.0) -> float:
        return self.values.get(aoh, {}).get(action, default)

    def row(self, aoh: Aoh) -> dict[int, float]:
        return self.values.get(aoh, {})

    def greedy(self, temperature: float = 0.0, generator: str = "greedy") -> Policy:
        table = {}
        for h, row in self.values.items():
            acts = sorted(row)
            p = softmax_policy([row[a] for a in acts], temperature)
            table[h] = {a: float(x) for a, x in zip(acts, p) if x > 0 or temperature > 0}
        return Policy(table, {"generator": generator, "temperature": temperature, **self.metadata})

    def check_finite(self) -> None:
        for h, row in self.values.items():
            if not all(math.isfinite(v) for v in row.values()):
                raise ValueError(f"non-finite Q value at {h}")

    def to_json(self) -> dict:
        entries = sorted(
            ({"aoh": h.key(), "q": [[a, row[a]] for a in sorted(row)]} for h, row in self.values.items()),
            key=lambda e: e["aoh"],
        )
        return {"format": QTABLE_FORMAT, "version": FORMAT_VERSION, "metadata": self.metadata, "entries": entries}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")))

    @classmethod
    def from_json(cls, data: dict) -> "QTable":
        if data.get("format") != QTABLE_FORMAT:
            raise FormatError(f"not a Q-table file (format={data.get('format')!r})")
        if data.get("version") != FORMAT_VERSION:
            raise FormatError(f"Q-table file version {data.get('version')} != {FORMAT_VERSION}")
        values = {Aoh.from_key(e["aoh"]): {int(a): float(v) for a, v in e["q"]} for e in data["entries"]}
        return cls(values, dict(data.get("metadata", {})))

    @classmethod
    def load(cls, path: str | Path) -> "QTable":
        return cls.from_json(json.loads(Path(path).read_text()))
