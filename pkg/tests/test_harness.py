import json

import numpy as np
import pytest

from obl.env import ToyGame, enumerate_reachable, mini_hanabi, random_game
from obl.harness import (
    CATEGORIES,
    ConfigMismatchError,
    GroundedPlayReport,
    UnsupportedEnvError,
    crossplay,
    grounded_play_report,
    verify,
)
from obl.harness.grounded import classify
from obl.policy import Policy
from obl.solver import SolverSettings, obl_operator, policy_value, selfplay_train


@pytest.fixture(scope="module")
def toy():
    env = ToyGame()
    tree = enumerate_reachable(env)
    pi, _ = obl_operator(env, Policy.uniform(), SolverSettings(), tree)
    return env, tree, pi


def test_exact_crossplay_of_obl_copies_is_five(toy):
    env, tree, _ = toy
    pols = [obl_operator(env, Policy.uniform(), SolverSettings(), tree, order_seed=k)[0] for k in range(3)]
    m = crossplay(env, pols, "exact", tree=tree)
    assert np.all(np.abs(m.values - 5.0) <= 1e-12)
    assert m.sp_mean() == pytest.approx(5.0) and m.xp_mean() == pytest.approx(5.0)


def test_single_policy_matrix_equals_value(toy):
    env, tree, pi = toy
    m = crossplay(env, [pi], "exact", tree=tree)
    assert m.values.shape == (1, 1)
    assert m.values[0, 0] == policy_value(env, pi, tree)[0]
    assert np.isnan(m.xp_mean())


def test_crossplay_pairs_alice_i_with_bob_j(toy):
    env, tree, _ = toy
    a, b = selfplay_train(env, 0), selfplay_train(env, 1)
    m = crossplay(env, [a, b], "exact", tree=tree)
    from obl.solver import cross_value

    assert m.values[0, 1] == pytest.approx(cross_value(env, [a, b], tree))
    assert m.values[1, 0] == pytest.approx(cross_value(env, [b, a], tree))


def test_sampled_crossplay_close_to_exact(toy):
    env, tree, pi = toy
    m = crossplay(env, [pi, pi], "sampled", episodes=2000, seed=4)
    assert np.all(np.abs(m.values - 5.0) < 1e-12)  # deterministic game under this policy
    rnd = crossplay(env, [Policy.uniform()], "sampled", episodes=4000, seed=4)
    exact = policy_value(env, Policy.uniform(), tree)[0]
    assert abs(rnd.values[0, 0] - exact) < 4 * rnd.stderr[0, 0]


def test_sampled_crossplay_is_seeded(toy):
    env, _, pi = toy
    a = crossplay(env, [Policy.uniform(), pi], "sampled", episodes=300, seed=9)
    b = crossplay(env, [Policy.uniform(), pi], "sampled", episodes=300, seed=9)
    assert a.to_json() == b.to_json()


def test_crossplay_rejects_mismatched_env(toy):
    env, _, pi = toy
    other = Policy({}, {"generator": "x", "env_config_hash": mini_hanabi("micro").config_hash()})
    with pytest.raises(ConfigMismatchError):
        crossplay(env, [pi, other])
    with pytest.raises(ValueError):
        crossplay(env, [pi], mode="approx")


def test_matrix_files(tmp_path, toy):
    env, tree, pi = toy
    m = crossplay(env, [pi, pi], "exact", tree=tree, labels=["a", "b"])
    m.save_csv(tmp_path / "m.csv")
    m.save_json(tmp_path / "m.json")
    rows = (tmp_path / "m.csv").read_text().splitlines()
    assert rows[0] == ",a,b" and rows[1].startswith("a,5.0")
    assert json.loads((tmp_path / "m.json").read_text())["values"] == [[5.0, 5.0], [5.0, 5.0]]


# -- grounded-play report -------------------------------------------------------

def test_classify_partition():
    assert {classify(c, r) for c in (True, False) for r in (True, False)} == set(CATEGORIES)


def careful_player(env, tree):
    """Plays only cards whose colour and rank were both hinted; otherwise hints or discards."""
    single = lambda m: m & (m - 1) == 0  # noqa: E731

    def fn(h, legal):
        partner_hand, mine, theirs = h.items[-1][0], h.items[-1][1], h.items[-1][2]
        cm, rm = mine[0]
        if single(cm) and single(rm):
            return env.play(0)
        if partner_hand:
            card, (pcm, prm) = partner_hand[0], theirs[0]
            for a in (env.hint_color(card[0]) if not single(pcm) else None,
                      env.hint_rank(card[1]) if not single(prm) else None):
                if a in legal:
                    return a
        return env.discard(0) if env.discard(0) in legal else legal[-1]

    return Policy.from_function(tree, fn)


def test_fully_hinted_player_is_all_both_known():
    # one token is not enough: a half-hinted card would be discarded to win it back
    env = mini_hanabi("micro", hint_tokens=3)
    pol = careful_player(env, enumerate_reachable(env))
    rep = grounded_play_report(env, pol, 2000, seed=0, label="careful")
    assert sum(rep.counts["careful"].values()) > 100
    assert rep.both_known("careful") == 1.0


@pytest.mark.parametrize("pol", ["uniform", "obl"])
def test_fractions_sum_to_one(pol):
    env = mini_hanabi("micro")
    policy = Policy.uniform() if pol == "uniform" else obl_operator(env, Policy.uniform())[0]
    rep = grounded_play_report(env, policy, 1000, seed=1, label=pol)
    assert sum(rep.fractions(pol).values()) == pytest.approx(1.0)


def test_report_merge_and_json(tmp_path):
    env = mini_hanabi("micro")
    a = grounded_play_report(env, Policy.uniform(), 200, seed=0, label="a")
    b = grounded_play_report(env, Policy.uniform(), 200, seed=0, label="b")
    rep = a.merge(b)
    assert rep.counts["a"] == rep.counts["b"]  # same seed, same policy
    rep.save(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert set(data["agents"]["a"]["fractions"]) == set(CATEGORIES)
    assert isinstance(rep, GroundedPlayReport)


def test_report_needs_card_semantics():
    with pytest.raises(UnsupportedEnvError):
        grounded_play_report(ToyGame(), Policy.uniform(), 10)


# -- verification suites (small instances; the full suites run in the acceptance file) --

def test_verify_lemma2():
    rep = verify("lemma2", seed=0)
    assert rep.passed and rep.details["violations"] == 0


def test_verify_small_thm1():
    rep = verify("thm1", seed=1, n_games=3, orderings=2)
    assert rep.passed and rep.max_violation <= 1e-12


def test_verify_small_thm4():
    rep = verify("thm4", seed=1, n_games=3)
    assert rep.passed


def test_verify_unknown_suite():
    with pytest.raises(KeyError):
        verify("thm9")


def test_verify_report_json(tmp_path):
    rep = verify("thm2", seed=3, n_games=4)
    rep.save(tmp_path / "thm2.json")
    data = json.loads((tmp_path / "thm2.json").read_text())
    assert data["suite"] == "thm2" and data["instances"] == 4 and data["details"]["seed"] == 3
    assert "PASS" in rep.line() or "FAIL" in rep.line()


def test_random_game_limits():
    for seed in range(20):
        env = random_game(seed)
        assert len(env.init) <= 6 and env.n_actions <= 3 and env.t_max <= 4 and env.n_players == 2
