"""Executable checks of the OBL guarantees on small exactly-solvable games.

Each suite returns a :class:`VerificationReport` with the worst violation
seen and whether it stays within the suite's slack.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..belief import consistent_trajectories, reach_weight
from ..env.base import DecPomdp
from ..env.random_game import random_game
from ..env.toy import ToyGame
from ..env.tree import enumerate_reachable
from ..policy import Policy, policy_distance, softmax_policy
from ..solver.baselines import best_response_values
from ..solver.exact import (
    SolverSettings,
    counterfactual_q,
    iterate_to_fixed_point,
    obl_operator,
    policy_value,
)

E = math.e
SUITES = ("thm1", "thm2", "thm3", "thm4", "lemma1", "lemma2")


@dataclass
class VerificationReport:
    suite: str
    instances: int
    max_violation: float
    slack: float
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def __post_init__(self):
        # numpy scalars sneak in from the checks; keep the report plain
        self.passed = bool(self.passed)
        self.max_violation = float(self.max_violation)

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True, default=_plain))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.suite:<7} {status}  instances={self.instances:<5} "
                f"max_violation={self.max_violation:.3e}  slack={self.slack:.0e}  ({self.seconds:.1f}s)")


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def random_full_support(tree, rng: np.random.Generator, concentration: float = 1.0) -> Policy:
    """Dirichlet-random policy with strictly positive mass on every legal action."""
    table = {}
    for h, nodes in tree.groups.items():
        legal = tree.nodes[nodes[0]].legal
        p = rng.dirichlet([concentration] * len(legal))
        p = 0.9 * p + 0.1 / len(legal)
        table[h] = {a: float(x) for a, x in zip(legal, p)}
    return Policy(table, {"generator": "custom", "kind": "dirichlet"})


def _games(seed: int, n: int):
    return [random_game(seed * 100_003 + k) for k in range(n)]


def _legal_map(tree):
    return {h: tree.nodes[ns[0]].legal for h, ns in tree.groups.items()}


# ---------------------------------------------------------------------------


def suite_thm1(seed: int = 0, n_games: int = 50, temperatures=(0.05, 0.5), orderings: int = 3) -> VerificationReport:
    """Same OBL policy whatever order AOHs and beliefs are visited in."""
    rng = np.random.default_rng([1, seed])
    envs: list[DecPomdp] = [ToyGame()] + _games(seed, n_games)
    worst = 0.0
    count = 0
    for env in envs:
        tree = enumerate_reachable(env)
        pi0 = random_full_support(tree, rng)
        legal = _legal_map(tree)
        for T in temperatures:
            s = SolverSettings(temperature=T)
            ref, _ = obl_operator(env, pi0, s, tree)
            for k in range(orderings):
                other, _ = obl_operator(env, pi0, s, tree, order_seed=int(rng.integers(1 << 31)))
                worst = max(worst, policy_distance(ref, other, tree.groups.keys(), legal))
            count += 1
    return VerificationReport("thm1", count, worst, 1e-12, worst <= 1e-12,
                              {"temperatures": list(temperatures), "games": len(envs)})


def suite_thm2(seed: int = 0, n_games: int = 100, temperature: float = 0.1) -> VerificationReport:
    """J(pi1) >= J(pi0) - e T t_max."""
    rng = np.random.default_rng([2, seed])
    worst = 0.0
    gaps = []
    for env in _games(seed, n_games):
        tree = enumerate_reachable(env)
        pi0 = random_full_support(tree, rng)
        pi1, _ = obl_operator(env, pi0, SolverSettings(temperature=temperature), tree)
        j0 = policy_value(env, pi0, tree)[0]
        j1 = policy_value(env, pi1, tree)[0]
        gaps.append(j1 - j0)
        worst = max(worst, j0 - E * temperature * env.t_max - j1)
    return VerificationReport("thm2", n_games, max(worst, 0.0), 1e-9, worst <= 1e-9,
                              {"temperature": temperature, "min_improvement": min(gaps),
                               "mean_improvement": float(np.mean(gaps))})


def suite_thm3(seed: int = 0, n_games: int = 20, temperature: float = 0.1, max_levels: int = 200) -> VerificationReport:
    """At a converged OBL fixed point no player gains more than e T (t_max - |tau^i|) by deviating."""
    envs: list[DecPomdp] = [ToyGame()] + _games(seed, n_games)
    worst = -math.inf
    converged = 0
    checked = 0
    for env in envs:
        tree = enumerate_reachable(env)
        res = iterate_to_fixed_point(env, Policy.uniform(), SolverSettings(temperature=temperature),
                                     max_levels=max_levels, tol=1e-9, tree=tree)
        if not res.converged:
            continue
        converged += 1
        pi = res.levels[-1][0]
        for player in range(env.n_players):
            for h, (br, on) in best_response_values(env, pi, player, tree).items():
                n_actions = h.t - 1
                bound = E * temperature * (env.t_max - n_actions)
                worst = max(worst, br - on - bound)
                checked += 1
    if converged == 0:
        return VerificationReport("thm3", 0, math.nan, 1e-9, False, {"reason": "no game converged"})
    return VerificationReport("thm3", converged, max(worst, 0.0), 1e-9, worst <= 1e-9,
                              {"temperature": temperature, "games": len(envs), "aohs_checked": checked,
                               "max_raw_margin": float(worst)})


def suite_thm4(seed: int = 0, n_games: int = 20) -> VerificationReport:
    """OBL from uniform pi0 at T=0 equals the grounded-belief backward induction."""
    envs: list[DecPomdp] = [ToyGame()] + _games(seed, n_games)
    worst = 0.0
    for env in envs:
        tree = enumerate_reachable(env)
        a, _ = obl_operator(env, Policy.uniform(), SolverSettings(), tree)
        b, _ = obl_operator(env, Policy.uniform(), SolverSettings(), tree, belief="grounded")
        worst = max(worst, policy_distance(a, b, tree.groups.keys(), _legal_map(tree)))
    return VerificationReport("thm4", len(envs), worst, 1e-12, worst <= 1e-12, {})


def _trajectory_side(env: DecPomdp, pi0: Policy, pi1: Policy, pi: Policy, t: int) -> float:
    """Sum over length-t trajectories of P(tau|pi0) E_{a~pi}[R + E V^pi1], by plain recursion."""
    gamma = env.gamma

    def v1(state, aohs):
        if env.is_terminal(state):
            return 0.0
        j = env.acting_player(state)
        legal = env.legal_actions(state)
        return sum(p * step_value(state, aohs, a, v1) for a, p in zip(legal, pi1.probs(aohs[j], legal)))

    def step_value(state, aohs, a, cont):
        return env.reward(state, a) + gamma * sum(
            q * cont(s2, env.next_aohs(aohs, state, a, s2)) for q, s2 in env.step_support(state, a)
        )

    total = 0.0

    def walk(state, aohs, depth, weight):
        nonlocal total
        if env.is_terminal(state):
            return
        j = env.acting_player(state)
        legal = env.legal_actions(state)
        if depth == t:
            total += weight * sum(p * step_value(state, aohs, a, v1) for a, p in zip(legal, pi.probs(aohs[j], legal)))
            return
        for a, p in zip(legal, pi0.probs(aohs[j], legal)):
            for q, s2 in env.step_support(state, a):
                walk(s2, env.next_aohs(aohs, state, a, s2), depth + 1, weight * p * q)

    for p, s in env.initial_support():
        walk(s, env.initial_aohs(s), 1, p)
    return total


def _aoh_side(env: DecPomdp, tree, pi0: Policy, pi1: Policy, pi: Policy, t: int) -> float:
    """Sum over acting AOHs of length t of P(aoh|pi0) E_{a~pi} Q^{pi0->pi1}(a|aoh)."""
    total = 0.0
    for h in tree.layers[t] if t < len(tree.layers) else []:
        mass = sum(c.chance * reach_weight(pi0, c.steps) for c in consistent_trajectories(env, h))
        q = counterfactual_q(env, pi0, pi1, h)
        legal = sorted(q)
        total += mass * sum(p * q[a] for a, p in zip(legal, pi.probs(h, legal)))
    return total


def suite_lemma1(seed: int = 0, n_games: int = 20) -> VerificationReport:
    """Trajectory-space and AOH-space one-step expectations agree."""
    rng = np.random.default_rng([5, seed])
    worst = 0.0
    count = 0
    for env in _games(seed, n_games):
        tree = enumerate_reachable(env)
        pi0, pi1, pi = (random_full_support(tree, rng) for _ in range(3))
        for t in range(1, env.t_max + 1):
            lhs = _trajectory_side(env, pi0, pi1, pi, t)
            rhs = _aoh_side(env, tree, pi0, pi1, pi, t)
            worst = max(worst, abs(lhs - rhs))
            count += 1
    return VerificationReport("lemma1", count, worst, 1e-10, worst <= 1e-10, {"games": n_games})


def suite_lemma2(seed: int = 0, n_vectors: int = 1000, temperatures=(0.01, 0.1, 1.0, 10.0)) -> VerificationReport:
    """Softmax-weighted mean >= max - e T."""
    rng = np.random.default_rng([6, seed])
    violations = 0
    worst = -math.inf
    for _ in range(n_vectors):
        x = rng.uniform(-20, 20, size=int(rng.integers(1, 11)))
        for T in temperatures:
            mean = float(softmax_policy(x, T) @ x)
            gap = x.max() - E * T - mean
            worst = max(worst, gap)
            violations += gap > 0
    return VerificationReport("lemma2", n_vectors, max(worst, 0.0), 0.0, violations == 0,
                              {"violations": int(violations), "temperatures": list(temperatures),
                               "max_raw_margin": float(worst)})


RUNNERS = {
    "thm1": suite_thm1,
    "thm2": suite_thm2,
    "thm3": suite_thm3,
    "thm4": suite_thm4,
    "lemma1": suite_lemma1,
    "lemma2": suite_lemma2,
}


def verify(suite: str, seed: int = 0, **kwargs) -> VerificationReport:
    if suite not in RUNNERS:
        raise KeyError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    t0 = time.perf_counter()
    rep = RUNNERS[suite](seed=seed, **kwargs)
    rep.seconds = time.perf_counter() - t0
    rep.details["seed"] = seed
    return rep
