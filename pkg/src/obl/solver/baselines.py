"""Exact best response and the cognitive-hierarchy (k-level) baseline."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from ..env.base import Aoh, DecPomdp
from ..env.tree import GameTree
from ..policy import Policy, argmax_ties, combine
from .exact import _reach, get_tree


@dataclass
class BestResponse:
    policy: Policy
    value: float  # J of (best response, fixed partners)
    aoh_values: dict[Aoh, float]  # belief-weighted BR value at each of the player's AOHs
    reachable: set  # AOHs with positive weight under the partners' policy


def best_response(
    env: DecPomdp,
    fixed: Policy,
    player: int,
    tree: GameTree | None = None,
    tie_break: str = "lowest",
    rng: random.Random | None = None,
    tol: float = 1e-9,
) -> BestResponse:
    """Deterministic best response of ``player`` to ``fixed`` (used for everyone else).

    Beliefs at the player's AOHs come from chance and the partners' fixed
    policy; the player's own past actions are part of the AOH and carry no
    weight. AOHs the partners never lead to have no information, so every
    action ties there and ``tie_break`` decides.
    """
    tree = get_tree(env, tree)
    gamma = env.gamma
    zeros, w = _reach(tree, fixed, exclude_player=player)
    V = [0.0] * len(tree.nodes)
    table: dict[Aoh, dict[int, float]] = {}
    aoh_values: dict[Aoh, float] = {}
    reachable = set()

    def action_values(n):
        return [n.rewards[k] + gamma * sum(p * V[c] for p, c in n.children[k]) for k in range(len(n.legal))]

    for layer in reversed(tree.layers):
        for h in layer:
            if h.player == player:
                continue
            nodes = tree.groups[h]
            probs = fixed.probs(h, tree.nodes[nodes[0]].legal)
            for i in nodes:
                row = action_values(tree.nodes[i])
                V[i] = sum(p * v for p, v in zip(probs, row) if p > 0)
        for h in layer:
            if h.player != player:
                continue
            nodes = tree.groups[h]
            legal = tree.nodes[nodes[0]].legal
            live = [i for i in nodes if zeros[i] == 0 and w[i] > 0]
            total = math.fsum(w[i] for i in live)
            rows = {i: action_values(tree.nodes[i]) for i in nodes}
            if total > 0:
                reachable.add(h)
                q = [math.fsum(w[i] * rows[i][k] for i in live) / total for k in range(len(legal))]
            else:
                q = [0.0] * len(legal)
            ties = argmax_ties(q, tol)
            k = ties[0] if tie_break == "lowest" or rng is None else rng.choice(ties)
            table[h] = {legal[k]: 1.0}
            aoh_values[h] = q[k]
            for i in nodes:
                V[i] = rows[i][k]
    root_value = math.fsum(tree.nodes[r].chance * V[r] for r in tree.roots)
    meta = {"generator": "best-response", "player": player, "fixed": fixed.digest(), "tie_break": tie_break}
    return BestResponse(Policy(table, meta), root_value, aoh_values, reachable)


def best_response_values(env: DecPomdp, pi: Policy, player: int, tree: GameTree | None = None):
    """Per-AOH (BR value, on-policy value) for ``player`` against ``pi``, over AOHs ``pi`` reaches."""
    tree = get_tree(env, tree)
    br = best_response(env, pi, player, tree)
    zeros, w = _reach(tree, pi, exclude_player=player)
    from .exact import _node_values

    Vpi = _node_values(tree, pi, env.gamma)
    out = {}
    for h in br.reachable:
        live = [i for i in tree.groups[h] if zeros[i] == 0 and w[i] > 0]
        total = math.fsum(w[i] for i in live)
        out[h] = (br.aoh_values[h], math.fsum(w[i] * Vpi[i] for i in live) / total)
    return out


def k_level_hierarchy(
    env: DecPomdp,
    pi0: Policy,
    k: int,
    tree: GameTree | None = None,
    tie_break: str = "lowest",
    seed: int | None = None,
) -> list[Policy]:
    """Level i is every player's best response to level i-1.

    Unlike OBL, the level below supplies both the beliefs about the past and
    the partner's future behaviour.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    tree = get_tree(env, tree)
    seeds = np.random.SeedSequence(0 if seed is None else seed).spawn(k * env.n_players)
    out = []
    prev = pi0
    for level in range(1, k + 1):
        parts = {}
        for p in range(env.n_players):
            ss = seeds[(level - 1) * env.n_players + p]
            rng = random.Random(int(ss.generate_state(1)[0])) if tie_break == "random" else None
            parts[p] = best_response(env, prev, p, tree, tie_break, rng).policy
        meta = {"generator": f"ch-level-{level}", "level": level, "tie_break": tie_break,
                "env_config_hash": env.config_hash()}
        if seed is not None:
            meta["seed"] = seed
        prev = combine(parts, meta)
        out.append(prev)
    return out
