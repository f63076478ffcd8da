"""Two-step cheap-talk vs. costly-signal communication game.

Alice sees a pet (cat or dog) and can switch a light on or off (free),
bail out (+1, game over) or pay 5 to remove a barrier so Bob can see the
pet. Bob then bails (+0.5) or guesses the pet (+10 right, -10 wrong).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .base import DecPomdp

ALICE, BOB = 0, 1
PETS = ("cat", "dog")

LIGHT_ON, LIGHT_OFF, ALICE_BAIL, REVEAL = 0, 1, 2, 3
BOB_BAIL, GUESS_CAT, GUESS_DOG = 0, 1, 2

ALICE_ACTIONS = ("light-on", "light-off", "bail", "reveal")
BOB_ACTIONS = ("bail", "guess-cat", "guess-dog")

ALICE_BAIL_REWARD = 1.0
REVEAL_COST = -5.0
BOB_BAIL_REWARD = 0.5
CORRECT_GUESS = 10.0
WRONG_GUESS = -10.0


@dataclass
class ToyGame(DecPomdp):
    n_players: int = 2
    t_max: int = 2
    config: dict = field(default_factory=lambda: {"variant": "toy_game"})

    # states: ("alice", pet) | ("bob", pet, alice_action) | ("end", pet, alice_action, bob_action)
    def initial_support(self):
        return [(0.5, ("alice", pet)) for pet in PETS]

    def is_terminal(self, state):
        return state[0] == "end"

    def acting_player(self, state):
        return ALICE if state[0] == "alice" else BOB

    def legal_actions(self, state):
        if state[0] == "alice":
            return (LIGHT_ON, LIGHT_OFF, ALICE_BAIL, REVEAL)
        if state[0] == "bob":
            return (BOB_BAIL, GUESS_CAT, GUESS_DOG)
        return ()

    def reward(self, state, action):
        if state[0] == "alice":
            return {ALICE_BAIL: ALICE_BAIL_REWARD, REVEAL: REVEAL_COST}.get(action, 0.0)
        if action == BOB_BAIL:
            return BOB_BAIL_REWARD
        guessed = PETS[action - 1]
        return CORRECT_GUESS if guessed == state[1] else WRONG_GUESS

    def step_support(self, state, action):
        pet = state[1]
        if state[0] == "alice":
            if action == ALICE_BAIL:
                return [(1.0, ("end", pet, action, None))]
            return [(1.0, ("bob", pet, action))]
        return [(1.0, ("end", pet, state[2], action))]

    def observe(self, state, player):
        pet = state[1]
        if player == ALICE:
            return ("pet", pet)
        if state[0] == "alice":
            return None
        alice_action = state[2]
        light = "on" if alice_action == LIGHT_ON else "off"
        seen = pet if alice_action == REVEAL else None
        return (light, seen)

    def action_name(self, action, player=None):
        if player == BOB:
            return BOB_ACTIONS[action]
        if player == ALICE:
            return ALICE_ACTIONS[action]
        return str(action)


def total_reward(pet: str, alice_action: int, bob_action: int | None) -> float:
    """Closed-form episode reward, used as an independent check of the simulator."""
    if alice_action == ALICE_BAIL:
        return ALICE_BAIL_REWARD
    base = REVEAL_COST if alice_action == REVEAL else 0.0
    if bob_action == BOB_BAIL:
        return base + BOB_BAIL_REWARD
    right = PETS[bob_action - 1] == pet
    return base + (CORRECT_GUESS if right else WRONG_GUESS)
