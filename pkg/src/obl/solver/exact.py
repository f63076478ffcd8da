"""Exact counterfactual values and the OBL operator by backward induction.

The operator works on the enumerated game tree. Acting AOHs are visited one
length-layer at a time, longest first, so every successor AOH already has its
new policy fixed when its predecessors are solved. Per-node values under the
new policy (``V1``) are filled in as each AOH is decided.
"""

from __future__ import annotations

import logging
import math
import random
from collections.abc import Mapping
from dataclasses import dataclass, field, replace

from ..belief import UnreachableHistoryError, exact_belief
from ..env.base import Aoh, DecPomdp
from ..env.tree import DEFAULT_BUDGET, GameTree, enumerate_reachable
from ..policy import Policy, QTable, argmax_ties, softmax_policy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    temperature: float = 0.0
    tie_break: str = "lowest"  # or "random" (needs a seed)
    gamma: float | None = None  # None: use env.gamma
    tolerance: float = 1e-12
    # "tremble": pi0-zero-probability AOHs are weighted by the fewest-trembles
    # limit; identical to "strict" wherever pi0 reaches the AOH.
    support: str = "tremble"
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.tie_break not in ("lowest", "random"):
            raise ValueError(f"unknown tie_break {self.tie_break!r}")
        if self.support not in ("tremble", "strict"):
            raise ValueError(f"unknown support mode {self.support!r}")

    def discount(self, env: DecPomdp) -> float:
        return env.gamma if self.gamma is None else self.gamma


def get_tree(env: DecPomdp, tree: GameTree | None = None, budget: int = DEFAULT_BUDGET) -> GameTree:
    if tree is not None:
        return tree
    cache = env.__dict__.setdefault("_tree_cache", {})
    if budget not in cache:
        cache[budget] = enumerate_reachable(env, budget)
    return cache[budget]


# ---------------------------------------------------------------------------
# policy evaluation


class NodeValues(Mapping):
    """V(tau) for every enumerated trajectory prefix, keyed by ``Trajectory`` or its ``key``."""

    def __init__(self, tree: GameTree, values: list[float]):
        self.tree = tree
        self.values = values
        self._index = None

    def _lookup(self):
        if self._index is None:
            self._index = {self.tree.trajectory(i).key: i for i in range(len(self.tree.nodes))}
        return self._index

    def __getitem__(self, key):
        if hasattr(key, "key"):
            key = key.key
        return self.values[self._lookup()[key]]

    def __iter__(self):
        return iter(self._lookup())

    def __len__(self):
        return len(self.values)


def _node_values(tree: GameTree, pi: Policy, gamma: float) -> list[float]:
    V = [0.0] * len(tree.nodes)
    for i in range(len(tree.nodes) - 1, -1, -1):
        n = tree.nodes[i]
        if n.terminal:
            continue
        probs = pi.probs(n.aoh, n.legal)
        v = 0.0
        for k, p in enumerate(probs):
            if p > 0:
                v += p * (n.rewards[k] + gamma * sum(q * V[c] for q, c in n.children[k]))
        V[i] = v
    return V


def _expected_root(tree: GameTree, V: list[float]) -> float:
    return math.fsum(tree.nodes[r].chance * V[r] for r in tree.roots)


def policy_value(env: DecPomdp, pi: Policy, tree: GameTree | None = None, gamma: float | None = None):
    """(J, V): expected return of ``pi`` and the value of every trajectory prefix."""
    tree = get_tree(env, tree)
    gamma = env.gamma if gamma is None else gamma
    V = _node_values(tree, pi, gamma)
    return _expected_root(tree, V), NodeValues(tree, V)


def cross_value(env: DecPomdp, policies: list[Policy], tree: GameTree | None = None) -> float:
    """Expected return when player p follows ``policies[p]``."""
    from ..policy import combine

    return policy_value(env, combine(dict(enumerate(policies))), tree)[0]


# ---------------------------------------------------------------------------
# counterfactual Q / V by direct belief enumeration


def _continuation(env: DecPomdp, pi: Policy, gamma: float, memo: dict, state, aohs) -> float:
    """V^pi from a state given every player's AOH there."""
    if env.is_terminal(state):
        return 0.0
    key = (state, aohs)
    hit = memo.get(key)
    if hit is not None:
        return hit
    player = env.acting_player(state)
    legal = env.legal_actions(state)
    v = 0.0
    for a, p in zip(legal, pi.probs(aohs[player], legal)):
        if p > 0:
            v += p * _action_value(env, pi, gamma, memo, state, aohs, a)
    memo[key] = v
    return v


def _action_value(env, pi, gamma, memo, state, aohs, a) -> float:
    r = env.reward(state, a)
    nxt = 0.0
    for q, s2 in env.step_support(state, a):
        if q > 0:
            nxt += q * _continuation(env, pi, gamma, memo, s2, env.next_aohs(aohs, state, a, s2))
    return r + gamma * nxt


def _replay_aohs(env: DecPomdp, traj):
    aohs = env.initial_aohs(traj.states[0])
    for s, a, s2 in zip(traj.states, traj.actions, traj.states[1:]):
        aohs = env.next_aohs(aohs, s, a, s2)
    return aohs


def counterfactual_q(env: DecPomdp, pi0: Policy, pi1: Policy, aoh: Aoh, tremble: bool = False,
                     gamma: float | None = None) -> dict[int, float]:
    """Q^{pi0->pi1}(a | aoh): beliefs from pi0, continuation under pi1.

    Returns ``{}`` for AOHs whose trajectories have all ended.
    """
    gamma = env.gamma if gamma is None else gamma
    belief = exact_belief(env, pi0, aoh, tremble=tremble)
    memo: dict = {}
    q: dict[int, float] = {}
    for tr, w in belief.support:
        s = tr.last_state
        if env.is_terminal(s):
            continue
        aohs = _replay_aohs(env, tr)
        for a in env.legal_actions(s):
            q[a] = q.get(a, 0.0) + w * _action_value(env, pi1, gamma, memo, s, aohs, a)
    return q


def counterfactual_v(env: DecPomdp, pi0: Policy, pi1: Policy, aoh: Aoh, tremble: bool = False,
                     gamma: float | None = None) -> float:
    """E over tau ~ B_pi0(aoh) of V^pi1(tau)."""
    gamma = env.gamma if gamma is None else gamma
    belief = exact_belief(env, pi0, aoh, tremble=tremble)
    memo: dict = {}
    return math.fsum(
        w * _continuation(env, pi1, gamma, memo, tr.last_state, _replay_aohs(env, tr)) for tr, w in belief.support
    )


# ---------------------------------------------------------------------------
# the OBL operator


def _reach(tree: GameTree, pi: Policy, exclude_player: int | None = None):
    """Per-node (trembles, weight): chance times pi's action probabilities.

    A zero-probability action adds one tremble and contributes 1/|legal|.
    Actions of ``exclude_player`` are not weighted at all.
    """
    zeros = [0] * len(tree.nodes)
    w = [0.0] * len(tree.nodes)
    for r in tree.roots:
        w[r] = tree.nodes[r].chance
    for i, n in enumerate(tree.nodes):
        if n.terminal:
            continue
        if n.player == exclude_player:
            probs = [1.0] * len(n.legal)
        else:
            probs = pi.probs(n.aoh, n.legal)
        for k, outcomes in enumerate(n.children):
            p = probs[k]
            z, base = (zeros[i], w[i] * p) if p > 0 else (zeros[i] + 1, w[i] / len(n.legal))
            for q, c in outcomes:
                zeros[c] = z
                w[c] = base * q
    return zeros, w


def belief_weights(tree: GameTree, reach, h: Aoh, strict: bool) -> list[tuple[int, float]]:
    """Normalised (node, weight) pairs for the belief at ``h``."""
    zeros, w = reach
    nodes = tree.groups[h]
    fewest = min(zeros[i] for i in nodes)
    if fewest > 0 and strict:
        raise UnreachableHistoryError(f"AOH has zero probability under pi0: {h}")
    picked = [(i, w[i]) for i in nodes if zeros[i] == fewest]
    total = math.fsum(x for _, x in picked)
    if total <= 0:
        raise UnreachableHistoryError(f"AOH has zero weight: {h}")
    return [(i, x / total) for i, x in picked]


def _pick(q: list[float], settings: SolverSettings, rng: random.Random | None) -> tuple[list[float], bool]:
    if settings.temperature > 0:
        return list(softmax_policy(q, settings.temperature)), False
    ties = argmax_ties(q, settings.tolerance)
    k = ties[0] if settings.tie_break == "lowest" or rng is None else rng.choice(ties)
    out = [0.0] * len(q)
    out[k] = 1.0
    return out, len(ties) > 1


def obl_operator(
    env: DecPomdp,
    pi0: Policy,
    settings: SolverSettings = SolverSettings(),
    tree: GameTree | None = None,
    order_seed: int | None = None,
    belief: str = "pi0",
    seed: int | None = None,
    generator: str = "obl-level-1",
) -> tuple[Policy, QTable]:
    """pi1 = OBL(pi0) and its counterfactual Q table on every reachable acting AOH.

    ``belief="grounded"`` swaps the counterfactual belief for the grounded
    one (chance weights only). ``order_seed`` shuffles the iteration order
    inside each layer; the result should not change.
    """
    tree = get_tree(env, tree, settings.budget)
    gamma = settings.discount(env)
    if belief == "pi0":
        reach = _reach(tree, pi0)
    elif belief == "grounded":
        reach = ([0] * len(tree.nodes), [n.chance for n in tree.nodes])
    else:
        raise ValueError(f"unknown belief {belief!r}")
    strict = settings.support == "strict"
    shuffler = random.Random(order_seed) if order_seed is not None else None
    tie_rng = random.Random(seed) if settings.tie_break == "random" else None

    V1 = [0.0] * len(tree.nodes)
    policy: dict[Aoh, dict[int, float]] = {}
    qvals: dict[Aoh, dict[int, float]] = {}
    ties = 0
    for layer in reversed(tree.layers):
        layer = list(layer)
        if shuffler is not None:
            shuffler.shuffle(layer)
        for h in layer:
            weights = belief_weights(tree, reach, h, strict)
            if shuffler is not None:
                shuffler.shuffle(weights)
            legal = tree.nodes[weights[0][0]].legal
            rows = {}
            for i in tree.groups[h]:
                n = tree.nodes[i]
                rows[i] = [r + gamma * sum(p * V1[c] for p, c in out) for r, out in zip(n.rewards, n.children)]
            q = [0.0] * len(legal)
            for i, w in weights:
                row = rows[i]
                for k in range(len(legal)):
                    q[k] += w * row[k]
            probs, tied = _pick(q, settings, tie_rng)
            ties += tied
            policy[h] = {a: p for a, p in zip(legal, probs) if p > 0}
            qvals[h] = dict(zip(legal, q))
            # V1 for every node of the AOH, including zero-belief ones
            for i, row in rows.items():
                V1[i] = sum(p * v for p, v in zip(probs, row) if p > 0)
    meta = {
        "generator": generator,
        "temperature": settings.temperature,
        "tie_break": settings.tie_break,
        "env": env.name,
        "env_config_hash": env.config_hash(),
        "belief": belief,
        "pi0": pi0.digest(),
        "ties": ties,
    }
    if seed is not None:
        meta["seed"] = seed
    if ties:
        log.debug("%s: %d AOHs decided by tie-break", generator, ties)
    return Policy(policy, meta), QTable(qvals, {k: meta[k] for k in ("generator", "env_config_hash")})


def obl_hierarchy(
    env: DecPomdp,
    pi0: Policy,
    settings: SolverSettings = SolverSettings(),
    levels: int = 1,
    tree: GameTree | None = None,
    seed: int | None = None,
) -> list[tuple[Policy, QTable]]:
    """Iterate the operator; level k+1 uses level k as its pi0."""
    if levels < 0:
        raise ValueError("levels must be >= 0")
    tree = get_tree(env, tree, settings.budget)
    out = []
    prev = pi0
    for k in range(1, levels + 1):
        s = None if seed is None else seed * 1000 + k
        pi, q = obl_operator(env, prev, settings, tree, seed=s, generator=f"obl-level-{k}")
        pi.metadata["level"] = k
        out.append((pi, q))
        prev = pi
    return out


@dataclass
class Convergence:
    levels: list = field(default_factory=list)
    converged: bool = False
    change: float = math.inf


def iterate_to_fixed_point(env, pi0, settings=SolverSettings(), max_levels=50, tol=1e-9, tree=None) -> Convergence:
    """Apply OBL until the max per-AOH change drops below ``tol``."""
    from ..policy import policy_distance

    tree = get_tree(env, tree, settings.budget)
    legal = {h: tree.nodes[ns[0]].legal for h, ns in tree.groups.items()}
    res = Convergence()
    prev = pi0
    for k in range(1, max_levels + 1):
        pi, q = obl_operator(env, prev, settings, tree, generator=f"obl-level-{k}")
        res.levels.append((pi, q))
        if k > 1:
            res.change = policy_distance(prev, pi, tree.groups.keys(), legal)
            if res.change < tol:
                res.converged = True
                break
        prev = pi
    return res


def with_temperature(settings: SolverSettings, T: float) -> SolverSettings:
    return replace(settings, temperature=T)
