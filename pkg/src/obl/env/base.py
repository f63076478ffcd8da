"""Turn-based, bounded-length Dec-POMDP abstraction.

States, observations and action views are plain hashable values built from
ints, strings, ``None`` and tuples. That keeps them usable as dict keys and
lets them round-trip through JSON for the canonical encodings below.
"""

from __future__ import annotations

import hashlib
import json
import random
import struct
from dataclasses import dataclass, field
from typing import Any, Hashable, NamedTuple, Sequence

AOH_FORMAT_TAG = b"OBLAOH\x01"
TRAJ_FORMAT_TAG = b"OBLTRJ\x01"

State = Hashable
Action = int


class IllegalActionError(ValueError):
    pass


class InvalidConfigError(ValueError):
    """Raised for invalid environment parameter combinations."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def to_jsonable(value: Any) -> Any:
    if isinstance(value, tuple):
        return [to_jsonable(v) for v in value]
    return value


def from_jsonable(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(from_jsonable(v) for v in value)
    return value


def _dump(value: Any) -> bytes:
    return json.dumps(to_jsonable(value), separators=(",", ":"), sort_keys=True).encode()


def _pack(chunks: Sequence[bytes]) -> bytes:
    return b"".join(struct.pack(">I", len(c)) + c for c in chunks)


def _unpack(data: bytes) -> list[bytes]:
    chunks, pos = [], 0
    while pos < len(data):
        (n,) = struct.unpack_from(">I", data, pos)
        pos += 4
        chunks.append(data[pos : pos + n])
        pos += n
    return chunks


class Aoh(NamedTuple):
    """Action-observation history of one player.

    ``items`` alternates observations and action views:
    ``(o_1, v_1, o_2, v_2, ..., o_t)``. Equal tuples have equal canonical
    encodings and vice versa (for JSON-representable components).
    """

    player: int
    items: tuple

    @property
    def t(self) -> int:
        return (len(self.items) + 1) // 2

    @property
    def observations(self) -> tuple:
        return self.items[0::2]

    @property
    def action_views(self) -> tuple:
        return self.items[1::2]

    def extend(self, view: Any, obs: Any) -> "Aoh":
        return Aoh(self.player, self.items + (view, obs))

    def prefix(self, t: int) -> "Aoh":
        return Aoh(self.player, self.items[: 2 * t - 1])

    def encode(self) -> bytes:
        return AOH_FORMAT_TAG + struct.pack(">I", self.player) + _pack([_dump(x) for x in self.items])

    def key(self) -> str:
        """Hex form of the canonical encoding, for text files."""
        return self.encode().hex()

    @classmethod
    def decode(cls, data: bytes) -> "Aoh":
        if not data.startswith(AOH_FORMAT_TAG):
            raise ValueError("not an AOH encoding (bad format tag)")
        body = data[len(AOH_FORMAT_TAG) :]
        (player,) = struct.unpack_from(">I", body, 0)
        items = tuple(from_jsonable(json.loads(c)) for c in _unpack(body[4:]))
        return cls(player, items)

    @classmethod
    def from_key(cls, key: str) -> "Aoh":
        return cls.decode(bytes.fromhex(key))


@dataclass(frozen=True)
class Trajectory:
    """A trajectory prefix ``tau_t``: states s_1..s_t and the t-1 actions between them."""

    states: tuple
    actions: tuple = ()
    rewards: tuple = ()
    terminal: bool = False

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1 or len(self.rewards) != len(self.actions):
            raise ValueError("trajectory needs len(states) == len(actions) + 1 == len(rewards) + 1")

    @property
    def t(self) -> int:
        return len(self.states)

    @property
    def last_state(self) -> State:
        return self.states[-1]

    @property
    def steps(self) -> list[tuple[State, Action | None, float | None]]:
        out = [(s, a, r) for s, a, r in zip(self.states, self.actions, self.rewards)]
        out.append((self.states[-1], None, None))
        return out

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    @property
    def key(self) -> tuple:
        return (self.states, self.actions)

    def encode(self) -> bytes:
        return TRAJ_FORMAT_TAG + _pack([_dump(self.states), _dump(self.actions)])

    def extend(self, action: Action, reward: float, state: State, terminal: bool) -> "Trajectory":
        return Trajectory(
            self.states + (state,), self.actions + (action,), self.rewards + (reward,), terminal
        )


def sample_support(support: Sequence[tuple[float, Any]], rng: random.Random) -> Any:
    u = rng.random()
    acc = 0.0
    for p, x in support:
        acc += p
        if u < acc:
            return x
    return support[-1][1]


@dataclass
class DecPomdp:
    """Base class for bounded-length, turn-based Dec-POMDPs.

    Subclasses implement the model functions. Chance lives in
    :meth:`initial_support` and :meth:`step_support`; every non-terminal
    state has exactly one acting player.

    The solvers assume perfect recall: a player's observation tells it when
    it is its turn to act, and its own past actions are visible in its AOH.
    """

    n_players: int = 2
    t_max: int = 1
    gamma: float = 1.0
    config: dict = field(default_factory=dict)

    # -- model -----------------------------------------------------------
    def initial_support(self) -> list[tuple[float, State]]:
        raise NotImplementedError

    def is_terminal(self, state: State) -> bool:
        raise NotImplementedError

    def acting_player(self, state: State) -> int:
        raise NotImplementedError

    def legal_actions(self, state: State) -> tuple[Action, ...]:
        raise NotImplementedError

    def reward(self, state: State, action: Action) -> float:
        raise NotImplementedError

    def step_support(self, state: State, action: Action) -> list[tuple[float, State]]:
        raise NotImplementedError

    def observe(self, state: State, player: int) -> Any:
        raise NotImplementedError

    def action_view(self, state: State, action: Action, player: int) -> Any:
        """What ``player`` sees of ``action`` taken in ``state``. Public by default."""
        return action

    def action_name(self, action: Action, player: int | None = None) -> str:
        return str(action)

    def restore_state(self, obj: Any) -> State:
        """Rebuild a state decoded from JSON (tuples come back as plain tuples)."""
        return obj

    # -- derived -----------------------------------------------------------
    @property
    def name(self) -> str:
        return self.config.get("variant", type(self).__name__)

    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def cached_initial_support(self) -> list[tuple[float, State]]:
        """:meth:`initial_support`, computed once per instance."""
        support = self.__dict__.get("_initial_cache")
        if support is None:
            support = self.__dict__["_initial_cache"] = self.initial_support()
        return support

    def sample_initial(self, rng: random.Random) -> State:
        return sample_support(self.cached_initial_support(), rng)

    def initial_aohs(self, state: State) -> tuple[Aoh, ...]:
        return tuple(Aoh(p, (self.observe(state, p),)) for p in range(self.n_players))

    def next_aohs(self, aohs: Sequence[Aoh], state: State, action: Action, next_state: State) -> tuple[Aoh, ...]:
        return tuple(
            h.extend(self.action_view(state, action, h.player), self.observe(next_state, h.player))
            for h in aohs
        )


def step(env: DecPomdp, state: State, action: Action, rng: random.Random | None = None):
    """Sample one transition. Returns ``(next_state, reward, terminal)``."""
    if env.is_terminal(state) or action not in env.legal_actions(state):
        raise IllegalActionError(f"action {action!r} is not legal in state {state!r}")
    rng = rng or random.Random()
    nxt = sample_support(env.step_support(state, action), rng)
    return nxt, env.reward(state, action), env.is_terminal(nxt)


def step_support(env: DecPomdp, state: State, action: Action) -> list[tuple[float, State, float]]:
    """Enumerate all outcomes of a transition as ``(prob, next_state, reward)``."""
    if env.is_terminal(state) or action not in env.legal_actions(state):
        raise IllegalActionError(f"action {action!r} is not legal in state {state!r}")
    r = env.reward(state, action)
    return [(p, s, r) for p, s in env.step_support(state, action) if p > 0]


def aoh_of(env: DecPomdp, trajectory: Trajectory, player: int, t: int | None = None) -> Aoh:
    """Player ``player``'s view of the first ``t`` steps of ``trajectory``."""
    t = trajectory.t if t is None else t
    if not 1 <= t <= trajectory.t:
        raise ValueError(f"t={t} outside trajectory of length {trajectory.t}")
    states = trajectory.states
    items = [env.observe(states[0], player)]
    for k in range(t - 1):
        items.append(env.action_view(states[k], trajectory.actions[k], player))
        items.append(env.observe(states[k + 1], player))
    return Aoh(player, tuple(items))


def replay(env: DecPomdp, states: Sequence[State], actions: Sequence[Action]) -> Trajectory:
    """Rebuild a Trajectory (rewards, terminal flag) from its states and actions."""
    rewards = tuple(env.reward(s, a) for s, a in zip(states, actions))
    return Trajectory(tuple(states), tuple(actions), rewards, env.is_terminal(states[-1]))
