"""How much the active player knew about each card it played."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..env.base import DecPomdp
from ..policy import Policy
from ..rollout import make_rng, sample_action

CATEGORIES = ("both-known", "color-only", "rank-only", "none")


class UnsupportedEnvError(TypeError):
    pass


@dataclass
class GroundedPlayReport:
    counts: dict[str, dict[str, int]] = field(default_factory=dict)  # agent -> category -> plays
    episodes: int = 0
    seed: int = 0

    def fractions(self, agent: str) -> dict[str, float]:
        c = self.counts[agent]
        total = sum(c.values())
        return {k: (c[k] / total if total else 0.0) for k in CATEGORIES}

    def both_known(self, agent: str) -> float:
        return self.fractions(agent)["both-known"]

    def merge(self, other: "GroundedPlayReport") -> "GroundedPlayReport":
        return GroundedPlayReport({**self.counts, **other.counts}, max(self.episodes, other.episodes), self.seed)

    def to_json(self) -> dict:
        return {
            "episodes": self.episodes,
            "seed": self.seed,
            "agents": {a: {"counts": self.counts[a], "fractions": self.fractions(a)} for a in self.counts},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True))

    def render(self) -> str:
        lines = [f"{'agent':<24}" + "".join(f"{c:>12}" for c in CATEGORIES) + f"{'plays':>8}"]
        for a in self.counts:
            fr = self.fractions(a)
            lines.append(f"{a:<24}" + "".join(f"{fr[c]:>12.3f}" for c in CATEGORIES) + f"{sum(self.counts[a].values()):>8}")
        return "\n".join(lines)


def classify(color_known: bool, rank_known: bool) -> str:
    if color_known and rank_known:
        return "both-known"
    if color_known:
        return "color-only"
    if rank_known:
        return "rank-only"
    return "none"


def grounded_play_report(env: DecPomdp, policy: Policy, episodes: int = 10_000, seed: int = 0,
                         label: str | None = None) -> GroundedPlayReport:
    """Classify every play action over seeded self-play episodes of ``policy``."""
    if not hasattr(env, "card_knowledge") or not hasattr(env, "decode_action"):
        raise UnsupportedEnvError(f"{env.name} has no card semantics")
    from ..env.base import sample_support

    rng = make_rng(seed)
    counts = dict.fromkeys(CATEGORIES, 0)
    for _ in range(episodes):
        state = env.sample_initial(rng)
        aohs = env.initial_aohs(state)
        while not env.is_terminal(state):
            p = env.acting_player(state)
            legal = env.legal_actions(state)
            a = sample_action(policy, aohs[p], legal, rng)
            kind, slot = env.decode_action(a)
            if kind == "play":
                counts[classify(*env.card_knowledge(state, p, slot))] += 1
            nxt = sample_support(env.step_support(state, a), rng)
            aohs = env.next_aohs(aohs, state, a, nxt)
            state = nxt
    name = label or policy.metadata.get("label") or policy.generator
    return GroundedPlayReport({name: counts}, episodes, seed)
