"""Tabular independent Q-learning (IQL) self-play baseline."""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass

from ..env.base import DecPomdp, sample_support
from ..env.matrix import SimultaneousGame, convert_simultaneous
from ..policy import Policy, QTable


@dataclass(frozen=True)
class SelfPlayConfig:
    episodes: int = 200_000
    lr: float = 0.1
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5  # share of training over which epsilon decays
    init_scale: float = 1.0  # Q starts uniform in [-init_scale, init_scale]

    @classmethod
    def from_mapping(cls, data: dict | None) -> "SelfPlayConfig":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown self-play options: {sorted(unknown)}")
        return cls(**data)


def selfplay_train(env: DecPomdp | SimultaneousGame, seed: int, config: SelfPlayConfig | dict | None = None,
                   return_q: bool = False):
    """Train one team by IQL; returns the greedy joint policy.

    Each player learns Q over its own acting AOHs. The reward credited to a
    player's move is everything the team earns until that player's next
    turn, plus the discounted max Q there. A simultaneous game is first
    converted to its stage form, in which no mover sees the others' choice,
    so the learners face exactly the simultaneous problem.
    """
    if isinstance(env, SimultaneousGame):
        env = convert_simultaneous(env)
    cfg = config if isinstance(config, SelfPlayConfig) else SelfPlayConfig.from_mapping(config)
    rng = random.Random(seed)
    gamma = env.gamma
    Q: dict = {}
    decay = max(1, int(cfg.episodes * cfg.eps_fraction))

    def row(h, legal):
        r = Q.get(h)
        if r is None:
            r = Q[h] = {a: rng.uniform(-cfg.init_scale, cfg.init_scale) for a in legal}
        return r

    for ep in range(cfg.episodes):
        eps = cfg.eps_end + (cfg.eps_start - cfg.eps_end) * max(0.0, 1.0 - ep / decay)
        state = env.sample_initial(rng)
        aohs = env.initial_aohs(state)
        pending: dict[int, list] = {}  # player -> [row, action, return so far, discount]
        while not env.is_terminal(state):
            p = env.acting_player(state)
            legal = env.legal_actions(state)
            r = row(aohs[p], legal)
            if p in pending:
                prow, pa, acc, disc = pending[p]
                prow[pa] += cfg.lr * (acc + disc * max(r.values()) - prow[pa])
            if rng.random() < eps:
                a = legal[int(rng.random() * len(legal))]
            else:
                a = max(legal, key=lambda x: (r[x], -x))
            pending[p] = [r, a, 0.0, 1.0]
            rew = env.reward(state, a)
            for item in pending.values():
                item[2] += item[3] * rew
                item[3] *= gamma
            nxt = sample_support(env.step_support(state, a), rng)
            aohs = env.next_aohs(aohs, state, a, nxt)
            state = nxt
        for prow, pa, acc, _ in pending.values():
            prow[pa] += cfg.lr * (acc - prow[pa])

    meta = {"generator": f"selfplay-seed-{seed}", "seed": seed, "env_config_hash": env.config_hash(),
            "config": asdict(cfg)}
    q = QTable({h: dict(r) for h, r in Q.items()}, meta)
    pi = q.greedy(0.0, generator=meta["generator"])
    pi.metadata.update(meta)
    return (pi, q) if return_q else pi
