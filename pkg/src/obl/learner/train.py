"""Sample-based OBL learners.

Q-OBL plays pi0 for behaviour and branches off the real state to build
targets with the current greedy pi1. LB-OBL plays an epsilon-greedy pi1 and
builds targets on fictitious trajectories re-sampled from a learned belief
at each real AOH.

Training runs in deterministic rounds: the actor plays a fixed number of
episodes against the latest Q snapshot and pushes them to replay, then the
learner takes a fixed number of uniform batches. The snapshot is refreshed
every ``sync_interval`` learner steps, so stored targets can lag the learner
by at most that many steps (plus one round).
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import asdict, dataclass, field

from ..belief import BeliefMismatchError, LearnedBeliefModel
from ..env.base import Aoh, DecPomdp, Trajectory, sample_support
from ..env.tree import BudgetExceededError
from ..policy import Policy, QTable, policy_distance
from ..rollout import make_rng, sample_action, spawn_seeds
from .replay import ReplayBuffer, ReplayEntry

log = logging.getLogger(__name__)


class FictitiousConsistencyError(AssertionError):
    pass


@dataclass(frozen=True)
class LearnerConfig:
    episodes: int = 200_000
    lr: float = 0.05  # used by the "constant" schedule
    lr_schedule: str = "visit"  # "visit": max(1/n(h,a), lr_floor)
    lr_floor: float = 0.0
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5
    k: int | None = None  # None: bootstrap at the acting player's next turn
    partner_eps: float = 0.0  # exploration of partners inside the target window
    capacity: int = 20_000  # episodes
    batch_size: int = 32
    replay_ratio: float = 4.0  # learner samples per pushed episode
    episodes_per_round: int = 64
    sync_interval: int = 10  # learner steps between Q snapshots
    seed: int = 0
    eval_every: int = 10_000
    eval_episodes: int = 2_000
    debug: bool = True

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.capacity < self.batch_size:
            raise ValueError("capacity must be >= batch_size")
        if self.lr_schedule not in ("visit", "constant"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.sync_interval < 1 or self.episodes_per_round < 1:
            raise ValueError("sync_interval and episodes_per_round must be >= 1")

    @classmethod
    def from_mapping(cls, data: dict | None) -> "LearnerConfig":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown learner options: {sorted(unknown)}")
        return cls(**data)


@dataclass
class TrainResult:
    policy: Policy
    q: QTable
    visits: dict  # real behaviour visits per acting AOH
    stats: dict = field(default_factory=dict)
    curve: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# targets


def _greedy(row: dict | None, legal) -> int:
    if not row:
        return legal[0]
    best, arg = -math.inf, legal[0]
    for a in legal:
        v = row.get(a, 0.0)
        if v > best:
            best, arg = v, a
    return arg


def _max_q(row: dict | None, legal) -> float:
    if not row:
        return 0.0
    return max(row.get(a, 0.0) for a in legal)


def simulate_target(env: DecPomdp, q: dict, state, aohs, player: int, action: int, k: int | None,
                    rng: random.Random, next_state=None, partner_eps: float = 0.0) -> float:
    """Reward of ``action`` plus the simulated continuation under greedy pi1.

    Partners act greedily on their own AOHs until ``player``'s next turn
    (or for ``k`` steps); the tail is bootstrapped with max Q of whoever
    acts there. Terminal windows bootstrap with 0.
    """
    gamma = env.gamma
    G = env.reward(state, action)
    disc = gamma
    nxt = next_state if next_state is not None else sample_support(env.step_support(state, action), rng)
    aohs = env.next_aohs(aohs, state, action, nxt)
    state = nxt
    steps = 1
    while not env.is_terminal(state):
        j = env.acting_player(state)
        legal = env.legal_actions(state)
        if (k is None and j == player) or steps == k:
            return G + disc * _max_q(q.get(aohs[j]), legal)
        if partner_eps > 0 and rng.random() < partner_eps:
            a = legal[int(rng.random() * len(legal))]
        else:
            a = _greedy(q.get(aohs[j]), legal)
        G += disc * env.reward(state, a)
        disc *= gamma
        nxt = sample_support(env.step_support(state, a), rng)
        aohs = env.next_aohs(aohs, state, a, nxt)
        state = nxt
        steps += 1
    return G


def _aohs_along(env: DecPomdp, states, actions):
    aohs = env.initial_aohs(states[0])
    for s, a, s2 in zip(states, actions, states[1:]):
        aohs = env.next_aohs(aohs, s, a, s2)
    return aohs


def fictitious_target(env: DecPomdp, fictitious: Trajectory | tuple, action: int, q_snapshot, k: int | None = None,
                      rng: random.Random | None = None, player: int | None = None) -> float:
    """G' for applying the real ``action`` at the end of a belief-sampled trajectory."""
    states, actions = (fictitious.states, fictitious.actions) if isinstance(fictitious, Trajectory) else fictitious
    state = states[-1]
    if env.is_terminal(state):
        raise ValueError("fictitious trajectory already ended")
    if action not in env.legal_actions(state):
        raise ValueError(f"action {action} is not legal in the fictitious state")
    values = q_snapshot.values if isinstance(q_snapshot, QTable) else q_snapshot
    aohs = _aohs_along(env, states, actions)
    if player is None:
        player = env.acting_player(state)
    return simulate_target(env, values, state, aohs, player, action, k, rng or random.Random(0))


# ---------------------------------------------------------------------------
# shared training loop


class _Trainer:
    def __init__(self, env: DecPomdp, config: LearnerConfig, label: str, oracle: Policy | None, init: QTable | None):
        self.env = env
        self.cfg = config
        self.label = label
        self.oracle = oracle
        seeds = spawn_seeds(config.seed, 3)
        self.actor_rng = make_rng(seeds[0])
        self.learner_rng = make_rng(seeds[1])
        self.eval_rng = make_rng(seeds[2])
        self.Q: dict[Aoh, dict[int, float]] = {}
        if init is not None:
            self.Q = {h: dict(r) for h, r in init.values.items()}
        self.snapshot = {h: dict(r) for h, r in self.Q.items()}
        self.dirty: set = set()
        self.generation = 0
        self.n: dict = {}
        self.visits: dict[Aoh, int] = {}
        self.buffer = ReplayBuffer(config.capacity)
        self.learner_steps = 0
        self.stats: dict = {"checks": 0}
        self.curve: list = []
        self._tree = None
        self._legal: dict = {}

    def eps(self, ep: int) -> float:
        c = self.cfg
        decay = max(1, int(c.episodes * c.eps_fraction))
        return c.eps_end + (c.eps_start - c.eps_end) * max(0.0, 1.0 - ep / decay)

    def row(self, h: Aoh, legal) -> dict:
        r = self.Q.get(h)
        if r is None:
            r = self.Q[h] = {a: 0.0 for a in legal}
            self._legal[h] = tuple(legal)
        return r

    def learn(self, entries: list[ReplayEntry]) -> None:
        c = self.cfg
        for e in entries:
            for h, a, G in e.steps:
                row = self.Q[h]
                key = (h, a)
                n = self.n.get(key, 0) + 1
                self.n[key] = n
                lr = max(1.0 / n, c.lr_floor) if c.lr_schedule == "visit" else c.lr
                row[a] += lr * (G - row[a])
                self.dirty.add(h)
        self.learner_steps += 1
        if self.learner_steps % c.sync_interval == 0:
            self.sync()

    def sync(self) -> None:
        for h in self.dirty:
            self.snapshot[h] = dict(self.Q[h])
        self.dirty.clear()
        self.generation += 1

    def greedy_policy(self) -> Policy:
        q = QTable(self.Q, {})
        return q.greedy(0.0, generator=self.label)

    def evaluate(self, ep: int) -> None:
        from ..solver.exact import get_tree, policy_value

        pi = self.greedy_policy()
        row = {"episode": ep}
        try:
            if self._tree is None:
                self._tree = get_tree(self.env, budget=200_000)
            row["sp_score"] = policy_value(self.env, pi, self._tree)[0]
        except BudgetExceededError:
            from ..rollout import play_episode

            total = sum(play_episode(self.env, pi, self.eval_rng).total for _ in range(self.cfg.eval_episodes))
            row["sp_score"] = total / self.cfg.eval_episodes
        if self.oracle is not None:
            frequent = [h for h, v in self.visits.items() if v >= 1000 and h in self.Q]
            legal = {h: self._legal[h] for h in frequent}
            row["oracle_distance"] = policy_distance(pi, self.oracle, frequent, legal) if frequent else float("nan")
        self.curve.append(row)

    def run(self, play_episode_fn) -> TrainResult:
        c = self.cfg
        ep = 0
        next_eval = c.eval_every
        carry = 0.0
        while ep < c.episodes:
            n = min(c.episodes_per_round, c.episodes - ep)
            for _ in range(n):
                entry = play_episode_fn(self.eps(ep))
                entry.generation = self.generation
                self.buffer.push(entry)
                ep += 1
            carry += n * c.replay_ratio / c.batch_size
            batches, carry = int(carry), carry - int(carry)
            for _ in range(batches):
                self.learn(self.buffer.sample(c.batch_size, self.learner_rng))
            if c.eval_every and ep >= next_eval:
                self.evaluate(ep)
                next_eval += c.eval_every
        self.sync()
        pi = self.greedy_policy()
        q = QTable({h: dict(r) for h, r in self.Q.items()}, {"generator": self.label})
        self.stats.update(
            episodes=ep,
            learner_steps=self.learner_steps,
            generations=self.generation,
            mean_reuse=self.buffer.mean_reuse(),
            mean_reuse_evicted=self.buffer.mean_reuse_evicted(),
            replay="uniform",
            config=asdict(c),
        )
        pi.metadata.update(seed=c.seed, env_config_hash=self.env.config_hash())
        return TrainResult(pi, q, dict(self.visits), self.stats, self.curve)


# ---------------------------------------------------------------------------
# Q-OBL


def q_obl_train(env: DecPomdp, pi0: Policy, config: LearnerConfig | dict | None = None,
                oracle: Policy | None = None, init: QTable | None = None, label: str = "qobl-level-1") -> TrainResult:
    """Q-OBL: behaviour from pi0, targets from greedy pi1 branched off the real state.

    ``stats["reachability"][t]`` is the fraction of behaviour steps at time t
    whose whole prefix agrees with the current greedy pi1, which shows how
    few pi0 trajectories pi1 itself would visit.
    """
    cfg = config if isinstance(config, LearnerConfig) else LearnerConfig.from_mapping(config)
    tr = _Trainer(env, cfg, label, oracle, init)
    reach_hits: dict[int, int] = {}
    reach_total: dict[int, int] = {}
    rng = tr.actor_rng

    def play(_eps: float) -> ReplayEntry:
        state = env.sample_initial(rng)
        aohs = env.initial_aohs(state)
        steps, rewards = [], []
        on_pi1 = True
        t = 1
        while not env.is_terminal(state):
            p = env.acting_player(state)
            legal = env.legal_actions(state)
            h = aohs[p]
            tr.row(h, legal)
            tr.visits[h] = tr.visits.get(h, 0) + 1
            a = sample_action(pi0, h, legal, rng)
            reach_total[t] = reach_total.get(t, 0) + 1
            reach_hits[t] = reach_hits.get(t, 0) + on_pi1
            on_pi1 = on_pi1 and a == _greedy(tr.snapshot.get(h), legal)
            nxt = sample_support(env.step_support(state, a), rng)
            G = simulate_target(env, tr.snapshot, state, aohs, p, a, cfg.k, rng, next_state=nxt,
                                partner_eps=cfg.partner_eps)
            steps.append((h, a, G))
            rewards.append(env.reward(state, a))
            aohs = env.next_aohs(aohs, state, a, nxt)
            state = nxt
            t += 1
        return ReplayEntry(steps, tuple(rewards))

    res = tr.run(play)
    res.stats["reachability"] = {t: reach_hits[t] / reach_total[t] for t in sorted(reach_total)}
    log.info("%s reachability under greedy pi1 by t: %s", label, res.stats["reachability"])
    return res


# ---------------------------------------------------------------------------
# LB-OBL


def lb_obl_train(env: DecPomdp, belief: LearnedBeliefModel, config: LearnerConfig | dict | None = None,
                 oracle: Policy | None = None, init: QTable | None = None, label: str = "lbobl-level-1") -> TrainResult:
    """LB-OBL: epsilon-greedy pi1 behaviour, targets on belief-sampled fictitious states."""
    if belief.env_hash != env.config_hash():
        raise BeliefMismatchError("belief was fitted for a different environment config")
    cfg = config if isinstance(config, LearnerConfig) else LearnerConfig.from_mapping(config)
    tr = _Trainer(env, cfg, label, oracle, init)
    rng = tr.actor_rng
    aoh_cache: dict = {}

    def fictitious_aohs(key):
        hit = aoh_cache.get(key)
        if hit is None:
            hit = aoh_cache[key] = _aohs_along(env, *key)
        return hit

    def play(eps: float) -> ReplayEntry:
        state = env.sample_initial(rng)
        aohs = env.initial_aohs(state)
        steps, rewards = [], []
        while not env.is_terminal(state):
            p = env.acting_player(state)
            legal = env.legal_actions(state)
            h = aohs[p]
            row = tr.row(h, legal)
            tr.visits[h] = tr.visits.get(h, 0) + 1
            if rng.random() < eps:
                a = legal[int(rng.random() * len(legal))]
            else:
                a = _greedy(tr.snapshot.get(h, row), legal)
            # fictitious transition from a belief sample at the real AOH
            key = belief.sample_key(h, rng)
            f_state = key[0][-1]
            f_aohs = fictitious_aohs(key)
            if cfg.debug:
                tr.stats["checks"] += 1
                if f_aohs[p] != h or env.observe(f_state, p) != env.observe(state, p):
                    raise FictitiousConsistencyError(f"belief sample inconsistent with real AOH {h}")
            G = simulate_target(env, tr.snapshot, f_state, f_aohs, p, a, cfg.k, rng, partner_eps=cfg.partner_eps)
            steps.append((h, a, G))
            rewards.append(env.reward(state, a))
            nxt = sample_support(env.step_support(state, a), rng)
            aohs = env.next_aohs(aohs, state, a, nxt)
            state = nxt
        return ReplayEntry(steps, tuple(rewards))

    res = tr.run(play)
    res.stats["belief"] = {"episodes": belief.episodes, "alpha": belief.alpha, "pi0_hash": belief.pi0_hash}
    return res
