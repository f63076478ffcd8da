"""Seeded random micro Dec-POMDPs for property checks.

Dense random transitions, rewards uniform in [-1, 1], and per-player
observations that are random partitions of the state set, plus a flag telling
the player whether it is their turn. Every action is legal everywhere and is
seen by all players together with who took it, so each player recalls its
own moves. The episode ends after ``t_max`` steps. Bump ``GENERATOR_VERSION`` whenever the sampling code changes so
stored results stay attributable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import DecPomdp

GENERATOR_VERSION = 2


@dataclass
class RandomGame(DecPomdp):
    init: list = field(default_factory=list)
    trans: list = field(default_factory=list)  # trans[s][a] -> list of (p, s')
    rewards: list = field(default_factory=list)  # rewards[s][a]
    owner: list = field(default_factory=list)  # acting player per state
    blocks: list = field(default_factory=list)  # blocks[player][s] -> observation id
    n_actions: int = 2

    # state: (t, s); terminal once t exceeds t_max
    def initial_support(self):
        return [(p, (1, s)) for s, p in enumerate(self.init) if p > 0]

    def is_terminal(self, state):
        return state[0] > self.t_max

    def acting_player(self, state):
        return self.owner[state[1]]

    def legal_actions(self, state):
        return tuple(range(self.n_actions)) if state[0] <= self.t_max else ()

    def reward(self, state, action):
        return self.rewards[state[1]][action]

    def step_support(self, state, action):
        t = state[0] + 1
        return [(p, (t, s2)) for p, s2 in self.trans[state[1]][action]]

    def observe(self, state, player):
        s = state[1]
        my_turn = state[0] <= self.t_max and self.owner[s] == player
        return (self.blocks[player][s], my_turn)

    def action_view(self, state, action, player):
        return (self.owner[state[1]], action)


def random_game(
    seed: int,
    max_states: int = 6,
    max_actions: int = 3,
    max_t: int = 4,
    n_players: int = 2,
) -> RandomGame:
    rng = np.random.default_rng([GENERATOR_VERSION, seed])
    n_s = int(rng.integers(2, max_states + 1))
    n_a = int(rng.integers(2, max_actions + 1))
    t_max = int(rng.integers(2, max_t + 1))
    init = rng.dirichlet(np.ones(n_s))
    trans = [
        [[(float(p), s2) for s2, p in enumerate(rng.dirichlet(np.ones(n_s)))] for _ in range(n_a)]
        for _ in range(n_s)
    ]
    rewards = rng.uniform(-1.0, 1.0, size=(n_s, n_a)).tolist()
    owner = rng.integers(0, n_players, size=n_s).tolist()
    blocks = []
    for _ in range(n_players):
        n_blocks = int(rng.integers(1, n_s + 1))
        blocks.append(rng.integers(0, n_blocks, size=n_s).tolist())
    cfg = {
        "variant": "random_micro",
        "seed": seed,
        "generator_version": GENERATOR_VERSION,
        "limits": [max_states, max_actions, max_t, n_players],
    }
    return RandomGame(
        n_players=n_players,
        t_max=t_max,
        config=cfg,
        init=[float(p) for p in init],
        trans=trans,
        rewards=rewards,
        owner=owner,
        blocks=blocks,
        n_actions=n_a,
    )
