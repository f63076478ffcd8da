"""Exhaustive enumeration of trajectory prefixes and acting-player AOHs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .base import Aoh, DecPomdp, Trajectory

DEFAULT_BUDGET = 5_000_000
DAG_FORMAT = "obl-aoh-dag"
DAG_VERSION = 1


class BudgetExceededError(RuntimeError):
    pass


@dataclass(slots=True)
class Node:
    state: object
    t: int
    parent: int
    action: int | None  # action taken at the parent
    chance: float  # product of initial and transition probabilities
    player: int  # acting player, -1 when terminal
    legal: tuple
    rewards: tuple  # aligned with legal
    aohs: tuple  # one Aoh per player at this prefix
    children: list = field(default_factory=list)  # per legal index: [(prob, child), ...]

    @property
    def terminal(self) -> bool:
        return self.player < 0

    @property
    def aoh(self) -> Aoh:
        return self.aohs[self.player]


@dataclass
class GameTree:
    """All positive-probability trajectory prefixes of a game.

    Node indices increase with depth, so iterating in reverse visits
    children before parents.
    """

    env: DecPomdp
    nodes: list[Node]
    roots: list[int]
    groups: dict[Aoh, list[int]]  # acting AOH -> nodes where its owner acts
    layers: list[list[Aoh]]  # layers[t] = acting AOHs of length t

    @property
    def aohs(self) -> list[Aoh]:
        return list(self.groups)

    def topological_order(self) -> list[Aoh]:
        """Acting AOHs with every successor before its predecessors."""
        return [h for layer in reversed(self.layers) for h in layer]

    def aohs_of(self, player: int) -> list[Aoh]:
        return [h for h in self.groups if h.player == player]

    def trajectory(self, idx: int) -> Trajectory:
        states, actions, rewards = [], [], []
        node = self.nodes[idx]
        while True:
            states.append(node.state)
            if node.parent < 0:
                break
            parent = self.nodes[node.parent]
            actions.append(node.action)
            rewards.append(parent.rewards[parent.legal.index(node.action)])
            node = parent
        return Trajectory(
            tuple(reversed(states)), tuple(reversed(actions)), tuple(reversed(rewards)),
            self.nodes[idx].terminal,
        )

    def leaves(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.terminal]

    def trajectories(self) -> list[Trajectory]:
        """Every complete (terminal) trajectory."""
        return [self.trajectory(i) for i in self.leaves()]

    def successors(self, aoh: Aoh) -> set[Aoh]:
        out = set()
        for i in self.groups[aoh]:
            for outcomes in self.nodes[i].children:
                for _, c in outcomes:
                    child = self.nodes[c]
                    if not child.terminal:
                        out.add(child.aoh)
        return out

    def dump_dag(self, path: str | Path) -> None:
        """Write the AOH DAG as JSON lines: a header, then one record per AOH."""
        with open(path, "w") as fh:
            header = {
                "format": DAG_FORMAT,
                "version": DAG_VERSION,
                "env": self.env.name,
                "env_config_hash": self.env.config_hash(),
                "aohs": len(self.groups),
            }
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for h in self.topological_order():
                rec = {
                    "aoh": h.key(),
                    "player": h.player,
                    "t": h.t,
                    "trajectories": len(self.groups[h]),
                    "successors": sorted(s.key() for s in self.successors(h)),
                }
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def enumerate_reachable(env: DecPomdp, budget: int = DEFAULT_BUDGET) -> GameTree:
    """Enumerate every trajectory reachable under full-support play.

    Raises :class:`BudgetExceededError` once the number of acting AOHs
    passes ``budget``.
    """
    nodes: list[Node] = []
    groups: dict[Aoh, list[int]] = {}
    layers: list[list[Aoh]] = [[] for _ in range(env.t_max + 2)]

    def make(state, t, parent, action, chance, aohs):
        if env.is_terminal(state):
            node = Node(state, t, parent, action, chance, -1, (), (), aohs)
        else:
            legal = tuple(env.legal_actions(state))
            if not legal:
                raise ValueError(f"non-terminal state {state!r} has no legal actions")
            if t > env.t_max:
                raise ValueError(f"{env.name}: trajectory longer than t_max={env.t_max}")
            player = env.acting_player(state)
            rewards = tuple(float(env.reward(state, a)) for a in legal)
            node = Node(state, t, parent, action, chance, player, legal, rewards, aohs)
            h = aohs[player]
            group = groups.get(h)
            if group is None:
                if len(groups) >= budget:
                    raise BudgetExceededError(f"more than {budget} AOHs in {env.name}")
                groups[h] = group = []
                layers[t].append(h)
            group.append(len(nodes))
        nodes.append(node)
        return len(nodes) - 1

    roots = [
        make(s, 1, -1, None, p, env.initial_aohs(s)) for p, s in env.initial_support() if p > 0
    ]
    frontier = roots
    while frontier:
        nxt = []
        for i in frontier:
            node = nodes[i]
            if node.terminal:
                continue
            for a in node.legal:
                outcomes = []
                for p, s2 in env.step_support(node.state, a):
                    if p <= 0:
                        continue
                    aohs = env.next_aohs(node.aohs, node.state, a, s2)
                    c = make(s2, node.t + 1, i, a, node.chance * p, aohs)
                    outcomes.append((p, c))
                    nxt.append(c)
                node.children.append(outcomes)
        frontier = nxt
    while layers and not layers[-1]:
        layers.pop()
    return GameTree(env, nodes, roots, groups, layers)
