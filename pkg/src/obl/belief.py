"""Beliefs over trajectories given one player's action-observation history.

Three flavours:

* :func:`exact_belief` - P(tau | tau^i, pi0), every past action assumed to come from pi0.
* :func:`grounded_belief` - conditions on observations only; partner-action
  likelihoods are left out.
* :class:`LearnedBeliefModel` - add-alpha smoothed counts of hidden completions
  collected by rolling out pi0 (:func:`fit_count_belief`).

All three enumerate the trajectories consistent with an AOH by a DFS that
prunes on the owner's observations and action views, so none of them needs
the full game tree.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .env.base import Aoh, DecPomdp, Trajectory, aoh_of, from_jsonable, _unpack, TRAJ_FORMAT_TAG
from .policy import Policy
from .rollout import make_rng, play_episode, spawn_seeds

BELIEF_FORMAT = "obl-belief"
BELIEF_VERSION = 1
DEFAULT_COMPLETION_BUDGET = 200_000
CHUNK_EPISODES = 5_000


class UnreachableHistoryError(ValueError):
    """The AOH has zero probability under the assumed past policy."""


class InconsistentHistoryError(ValueError):
    """No trajectory of the game produces this AOH."""


class NoSupportError(ValueError):
    """A learned belief has nothing to sample at this AOH."""


class BeliefMismatchError(ValueError):
    pass


@dataclass
class Completion:
    trajectory: Trajectory
    chance: float
    steps: tuple  # (acting AOH, legal actions, action taken) per step


def consistent_trajectories(env: DecPomdp, aoh: Aoh, budget: int = DEFAULT_COMPLETION_BUDGET) -> list[Completion]:
    """Every positive-probability trajectory prefix whose view for ``aoh.player`` equals ``aoh``."""
    me, items, t = aoh.player, aoh.items, aoh.t
    out: list[Completion] = []

    def dfs(states, actions, rewards, chance, aohs, steps):
        k = len(states)
        s = states[-1]
        if k == t:
            out.append(Completion(
                Trajectory(tuple(states), tuple(actions), tuple(rewards), env.is_terminal(s)),
                chance, tuple(steps),
            ))
            if len(out) > budget:
                raise OverflowError(f"more than {budget} completions for one AOH")
            return
        if env.is_terminal(s):
            return
        j = env.acting_player(s)
        legal = env.legal_actions(s)
        want_view, want_obs = items[2 * k - 1], items[2 * k]
        for a in legal:
            if env.action_view(s, a, me) != want_view:
                continue
            r = env.reward(s, a)
            for p, s2 in env.step_support(s, a):
                if p <= 0 or env.observe(s2, me) != want_obs:
                    continue
                dfs(
                    states + [s2], actions + [a], rewards + [r], chance * p,
                    env.next_aohs(aohs, s, a, s2), steps + [(aohs[j], legal, a)],
                )

    for p, s in env.cached_initial_support():
        if p > 0 and env.observe(s, me) == items[0]:
            dfs([s], [], [], p, env.initial_aohs(s), [])
    return out


def reach_weight(pi0: Policy, steps, tremble: bool = False):
    """pi0-probability of the actions along a path.

    With ``tremble`` the result is ``(n_zero, weight)``: zero-probability
    actions are counted and scored as uniform, which is the limit of
    conditioning on ``(1 - eps) pi0 + eps uniform`` as eps -> 0.
    """
    w, zeros = 1.0, 0
    for h, legal, a in steps:
        p = pi0.probs(h, legal)[legal.index(a)]
        if p > 0:
            w *= p
        elif tremble:
            zeros += 1
            w /= len(legal)
        else:
            return (0, 0.0) if tremble else 0.0
    return (zeros, w) if tremble else w


@dataclass
class BeliefDistribution:
    aoh: Aoh
    support: list[tuple[Trajectory, float]]

    def __post_init__(self):
        total = sum(p for _, p in self.support)
        if self.support and abs(total - 1.0) > 1e-9:
            raise ValueError(f"belief sums to {total}")

    def probs(self) -> dict[tuple, float]:
        return {tr.key: p for tr, p in self.support}

    def marginal(self, fn) -> dict:
        out: dict = {}
        for tr, p in self.support:
            k = fn(tr)
            out[k] = out.get(k, 0.0) + p
        return out

    def sample(self, rng: random.Random) -> Trajectory:
        u, acc = rng.random(), 0.0
        for tr, p in self.support:
            acc += p
            if u < acc:
                return tr
        return self.support[-1][0]

    def to_json(self, env: DecPomdp | None = None) -> dict:
        rows = []
        for tr, p in sorted(self.support, key=lambda x: -x[1]):
            rows.append({"prob": p, "states": _plain(tr.states), "actions": list(tr.actions)})
        return {"aoh": self.aoh.key(), "player": self.aoh.player, "t": self.aoh.t, "support": rows}


def _plain(x):
    if isinstance(x, tuple):
        return [_plain(v) for v in x]
    return x


def _normalise(aoh, comps, weights) -> BeliefDistribution:
    total = math.fsum(weights)
    support = [(c.trajectory, w / total) for c, w in zip(comps, weights) if w > 0]
    return BeliefDistribution(aoh, support)


def exact_belief(env: DecPomdp, pi0: Policy, aoh: Aoh, tremble: bool = False) -> BeliefDistribution:
    """P(tau | aoh, pi0) by enumeration of consistent trajectories.

    Raises :class:`UnreachableHistoryError` when pi0 gives the AOH zero
    probability, unless ``tremble`` is set (see :func:`reach_weight`).
    """
    comps = consistent_trajectories(env, aoh)
    if not comps:
        raise InconsistentHistoryError(f"no trajectory is consistent with {aoh}")
    if tremble:
        reach = [reach_weight(pi0, c.steps, tremble=True) for c in comps]
        fewest = min(z for z, _ in reach)
        weights = [c.chance * w if z == fewest else 0.0 for c, (z, w) in zip(comps, reach)]
    else:
        weights = [c.chance * reach_weight(pi0, c.steps) for c in comps]
    if math.fsum(weights) <= 0:
        raise UnreachableHistoryError(f"AOH has zero probability under pi0 ({pi0.generator}): {aoh}")
    return _normalise(aoh, comps, weights)


def grounded_belief(env: DecPomdp, aoh: Aoh) -> BeliefDistribution:
    """Prior times observation likelihood; what partner actions imply is ignored."""
    comps = consistent_trajectories(env, aoh)
    if not comps:
        raise InconsistentHistoryError(f"no trajectory is consistent with {aoh}")
    return _normalise(aoh, comps, [c.chance for c in comps])


# ---------------------------------------------------------------------------
# count-based learned belief


def _decode_traj(hexkey: str, env: DecPomdp) -> tuple:
    data = bytes.fromhex(hexkey)
    if not data.startswith(TRAJ_FORMAT_TAG):
        raise ValueError("bad trajectory encoding")
    states_blob, actions_blob = _unpack(data[len(TRAJ_FORMAT_TAG):])
    states = tuple(env.restore_state(s) for s in from_jsonable(json.loads(states_blob)))
    actions = from_jsonable(json.loads(actions_blob))
    return (states, actions)


@dataclass
class LearnedBeliefModel:
    """Smoothed per-AOH counts of hidden completions (full trajectory prefixes).

    ``distribution(aoh)`` assigns ``(n_c + alpha) / (N + alpha |C|)`` to each
    completion c, where C is every consistent completion when the DFS stays
    within ``completion_budget`` and the observed completions otherwise.
    Counts merge by addition, so :meth:`merge` is commutative and associative.
    """

    env: DecPomdp
    alpha: float = 1.0
    counts: dict[Aoh, Counter] = field(default_factory=dict)
    episodes: int = 0
    pi0_hash: str = "uniform"
    completion_budget: int = DEFAULT_COMPLETION_BUDGET

    def __post_init__(self):
        self.env_hash = self.env.config_hash()
        self._cache: dict = {}

    def record(self, aoh: Aoh, key: tuple, n: int = 1) -> None:
        self.counts.setdefault(aoh, Counter())[key] += n

    def merge(self, other: "LearnedBeliefModel") -> "LearnedBeliefModel":
        out = LearnedBeliefModel(self.env, self.alpha, {}, 0, self.pi0_hash, self.completion_budget)
        out.absorb(self)
        out.absorb(other)
        return out

    def absorb(self, other: "LearnedBeliefModel") -> None:
        """Add ``other``'s counts into this model in place."""
        if other.env_hash != self.env_hash or other.alpha != self.alpha or other.pi0_hash != self.pi0_hash:
            raise BeliefMismatchError("cannot merge belief models fitted for different env/pi0/alpha")
        for h, c in other.counts.items():
            mine = self.counts.get(h)
            if mine is None:
                self.counts[h] = Counter(c)
            else:
                mine.update(c)
        self.episodes += other.episodes
        self._cache.clear()

    def visits(self, aoh: Aoh) -> int:
        return sum(self.counts.get(aoh, {}).values())

    def _completions(self, aoh: Aoh) -> list[tuple] | None:
        try:
            comps = consistent_trajectories(self.env, aoh, self.completion_budget)
        except OverflowError:
            return None
        return [c.trajectory.key for c in comps]

    def _table(self, aoh: Aoh):
        hit = self._cache.get(aoh)
        if hit is not None:
            return hit
        seen = self.counts.get(aoh, Counter())
        keys = self._completions(aoh) if self.alpha > 0 else None
        if keys is None:
            keys = sorted(seen, key=repr)
        weights = [seen.get(k, 0) + self.alpha for k in keys]
        total = math.fsum(weights)
        if total <= 0:
            raise NoSupportError(f"learned belief has no support at {aoh}")
        cum, acc = [], 0.0
        for w in weights:
            acc += w / total
            cum.append(acc)
        hit = (keys, [w / total for w in weights], cum)
        self._cache[aoh] = hit
        return hit

    def distribution(self, aoh: Aoh) -> BeliefDistribution:
        from .env.base import replay

        keys, probs, _ = self._table(aoh)
        support = [(replay(self.env, *k), p) for k, p in zip(keys, probs) if p > 0]
        return BeliefDistribution(aoh, support)

    def sample_key(self, aoh: Aoh, rng: random.Random) -> tuple:
        keys, _, cum = self._table(aoh)
        u = rng.random()
        lo, hi = 0, len(cum) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cum[mid] > u:
                hi = mid
            else:
                lo = mid + 1
        return keys[lo]

    # -- persistence -------------------------------------------------------
    def to_json(self) -> dict:
        from .env.base import Trajectory as _T

        body = []
        for h in sorted(self.counts, key=lambda x: x.key()):
            rows = []
            for (states, actions), n in self.counts[h].items():
                key = _T(states, actions, (0.0,) * len(actions)).encode().hex()
                rows.append([key, n])
            rows.sort()
            body.append({"aoh": h.key(), "counts": rows})
        return {
            "format": BELIEF_FORMAT,
            "version": BELIEF_VERSION,
            "env_config_hash": self.env_hash,
            "pi0_hash": self.pi0_hash,
            "alpha": self.alpha,
            "episodes": self.episodes,
            "records": body,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")))

    @classmethod
    def load(cls, path: str | Path, env: DecPomdp) -> "LearnedBeliefModel":
        data = json.loads(Path(path).read_text())
        if data.get("format") != BELIEF_FORMAT:
            raise BeliefMismatchError(f"not a belief file (format={data.get('format')!r})")
        if data.get("version") != BELIEF_VERSION:
            raise BeliefMismatchError(f"belief file version {data.get('version')} != {BELIEF_VERSION}")
        if data["env_config_hash"] != env.config_hash():
            raise BeliefMismatchError("belief was fitted for a different environment config")
        model = cls(env, data["alpha"], {}, data["episodes"], data["pi0_hash"])
        for rec in data["records"]:
            h = Aoh.from_key(rec["aoh"])
            model.counts[h] = Counter({_decode_traj(k, env): n for k, n in rec["counts"]})
        return model


def _fit_chunk(env, pi0, episodes, alpha, seed, pi0_hash):
    rng = make_rng(seed)
    model = LearnedBeliefModel(env, alpha, {}, episodes, pi0_hash)
    for _ in range(episodes):
        ep = play_episode(env, pi0, rng)
        for t, player in enumerate(ep.players, start=1):
            model.record(ep.aohs[t - 1][player], ep.prefix_key(t))
    return model


def fit_count_belief(
    env: DecPomdp,
    pi0: Policy,
    episodes: int,
    alpha: float = 1.0,
    seed: int = 0,
    jobs: int = 1,
) -> LearnedBeliefModel:
    """Roll out pi0 and count hidden completions at every acting AOH.

    Episodes are split into fixed-size chunks with their own spawned seeds,
    so the fitted counts do not depend on ``jobs``.
    """
    if episodes < 0 or alpha < 0:
        raise ValueError("episodes and alpha must be non-negative")
    n_chunks = max(1, math.ceil(episodes / CHUNK_EPISODES))
    sizes = [min(CHUNK_EPISODES, episodes - i * CHUNK_EPISODES) for i in range(n_chunks)]
    seeds = spawn_seeds(seed, n_chunks)
    pi0_hash = pi0.digest()
    args = [(env, pi0, max(0, n), alpha, s, pi0_hash) for n, s in zip(sizes, seeds)]
    if jobs > 1 and n_chunks > 1:
        with ProcessPoolExecutor(jobs) as pool:
            parts = list(pool.map(_fit_chunk, *zip(*args)))
    else:
        parts = [_fit_chunk(*a) for a in args]
    model = parts[0]
    for part in parts[1:]:
        model.absorb(part)
    model.episodes = episodes
    return model


def sample_belief(model, aoh: Aoh, rng: random.Random) -> Trajectory:
    """Draw a trajectory consistent with ``aoh`` from a learned or exact belief."""
    from .env.base import replay

    if isinstance(model, BeliefDistribution):
        if model.aoh != aoh:
            raise ValueError("belief distribution is for a different AOH")
        if not model.support:
            raise NoSupportError(f"empty belief at {aoh}")
        return model.sample(rng)
    return replay(model.env, *model.sample_key(aoh, rng))


def check_consistent(env: DecPomdp, trajectory: Trajectory, aoh: Aoh) -> bool:
    return aoh_of(env, trajectory, aoh.player, aoh.t) == aoh
