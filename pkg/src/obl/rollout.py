"""Sampled play. Hot loops use ``random.Random``; seeds come from numpy SeedSequences."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .env.base import Aoh, DecPomdp, sample_support
from .policy import Policy


def make_rng(seed) -> random.Random:
    """A ``random.Random`` seeded from an int or a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        seed = int(seed.generate_state(1, dtype=np.uint64)[0])
    return random.Random(seed)


def spawn_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def sample_action(policy: Policy, aoh: Aoh, legal: Sequence[int], rng: random.Random) -> int:
    if policy.generator == "uniform" and aoh not in policy.table:
        return legal[int(rng.random() * len(legal))]
    probs = policy.probs(aoh, legal)
    return sample_support(list(zip(probs, legal)), rng)


@dataclass
class Episode:
    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    players: list = field(default_factory=list)  # acting player per step
    aohs: list = field(default_factory=list)  # all players' AOHs per step

    @property
    def total(self) -> float:
        return float(sum(self.rewards))

    def prefix_key(self, t: int) -> tuple:
        """(states, actions) of the length-t prefix; t is 1-based."""
        return (tuple(self.states[:t]), tuple(self.actions[: t - 1]))


def play_episode(
    env: DecPomdp,
    choose: Callable[[Aoh, tuple, random.Random], int] | Policy,
    rng: random.Random,
) -> Episode:
    """Run one episode; ``choose`` gets the acting player's AOH and legal actions."""
    if isinstance(choose, Policy):
        pol = choose
        choose = lambda h, legal, r: sample_action(pol, h, legal, r)  # noqa: E731
    ep = Episode()
    state = env.sample_initial(rng)
    aohs = env.initial_aohs(state)
    while not env.is_terminal(state):
        player = env.acting_player(state)
        legal = env.legal_actions(state)
        a = choose(aohs[player], legal, rng)
        ep.states.append(state)
        ep.aohs.append(aohs)
        ep.players.append(player)
        ep.actions.append(a)
        ep.rewards.append(env.reward(state, a))
        nxt = sample_support(env.step_support(state, a), rng)
        aohs = env.next_aohs(aohs, state, a, nxt)
        state = nxt
    ep.states.append(state)
    ep.aohs.append(aohs)
    return ep
