"""One-shot simultaneous games and their turn-based stage-game conversion."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .base import DecPomdp


@dataclass
class SimultaneousGame:
    """A single-stage game where every player picks an action at once."""

    n_actions: tuple[int, ...]
    payoff: Callable[[tuple[int, ...]], float]
    config: dict = field(default_factory=dict)

    @property
    def n_players(self) -> int:
        return len(self.n_actions)

    def joint_actions(self):
        return itertools.product(*(range(n) for n in self.n_actions))


def matrix_game(matrix: Sequence[Sequence[float]], config: dict | None = None) -> SimultaneousGame:
    rows = [list(r) for r in matrix]
    return SimultaneousGame(
        n_actions=(len(rows), len(rows[0])),
        payoff=lambda a: rows[a[0]][a[1]],
        config=config or {"variant": "matrix_coord", "payoff": rows},
    )


HIDDEN = None


@dataclass
class StageGame(DecPomdp):
    """Turn-based version of a :class:`SimultaneousGame`.

    Players move one after another in ``order``. Nobody sees the others'
    actions until the stage is complete; the terminal observation then
    reveals the joint action. The payoff is paid on the last mover's step.
    """

    game: SimultaneousGame | None = None
    order: tuple[int, ...] = ()

    # state: tuple of actions taken so far, in ``order`` positions
    def initial_support(self):
        return [(1.0, ())]

    def is_terminal(self, state):
        return len(state) == len(self.order)

    def acting_player(self, state):
        return self.order[len(state)]

    def legal_actions(self, state):
        if self.is_terminal(state):
            return ()
        return tuple(range(self.game.n_actions[self.acting_player(state)]))

    def _joint(self, state):
        joint = [0] * self.game.n_players
        for pos, a in enumerate(state):
            joint[self.order[pos]] = a
        return tuple(joint)

    def reward(self, state, action):
        if len(state) + 1 < len(self.order):
            return 0.0
        return float(self.game.payoff(self._joint(state + (action,))))

    def step_support(self, state, action):
        return [(1.0, state + (action,))]

    def observe(self, state, player):
        if self.is_terminal(state):
            return ("done", self._joint(state))
        return ("stage", len(state))

    def action_view(self, state, action, player):
        # own action is always known; others' are hidden until the stage ends
        return action if self.order[len(state)] == player else HIDDEN


def convert_simultaneous(game: SimultaneousGame, order: Sequence[int] | None = None) -> StageGame:
    order = tuple(range(game.n_players)) if order is None else tuple(order)
    if sorted(order) != list(range(game.n_players)):
        raise ValueError(f"order {order} is not a permutation of the players")
    cfg = dict(game.config)
    cfg["order"] = list(order)
    return StageGame(
        n_players=game.n_players, t_max=len(order), config=cfg, game=game, order=order
    )
