import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obl.env import ToyGame, convert_simultaneous, enumerate_reachable, matrix_game, random_game
from obl.env.toy import (
    ALICE_BAIL,
    BOB_BAIL,
    GUESS_CAT,
    GUESS_DOG,
    LIGHT_OFF,
    LIGHT_ON,
    REVEAL,
)
from obl.harness.verify import random_full_support
from obl.policy import Policy, QTable, combine, policy_distance, softmax_policy
from obl.solver import (
    SolverSettings,
    best_response,
    counterfactual_q,
    counterfactual_v,
    cross_value,
    iterate_to_fixed_point,
    k_level_hierarchy,
    obl_hierarchy,
    obl_operator,
    policy_value,
    selfplay_train,
)

E = math.e


@pytest.fixture(scope="module")
def toy():
    env = ToyGame()
    return env, enumerate_reachable(env)


def legal_map(tree):
    return {h: tree.nodes[ns[0]].legal for h, ns in tree.groups.items()}


def bob_aoh(tree, last_obs):
    return next(h for h in tree.aohs_of(1) if h.items[-1] == last_obs)


def alice_aoh(tree, pet):
    return next(h for h in tree.aohs_of(0) if h.items[0] == ("pet", pet))


def scripted(tree, alice, bob):
    """Toy policy from two functions: alice(pet) and bob(light, seen)."""
    def fn(h, legal):
        if h.player == 0:
            return alice(h.items[0][1])
        return bob(*h.items[-1])

    return Policy.from_function(tree, fn)


def guess_seen(light, seen):
    if seen is None:
        return BOB_BAIL
    return GUESS_CAT if seen == "cat" else GUESS_DOG


# -- policy evaluation ------------------------------------------------------

def test_value_reveal_and_guess(toy):
    env, tree = toy
    pi = scripted(tree, lambda pet: REVEAL, guess_seen)
    assert policy_value(env, pi, tree)[0] == pytest.approx(5.0, abs=1e-12)


def test_value_alice_bails(toy):
    env, tree = toy
    pi = scripted(tree, lambda pet: ALICE_BAIL, lambda l, s: GUESS_DOG)
    assert policy_value(env, pi, tree)[0] == 1.0


def test_value_light_then_bob_bails(toy):
    env, tree = toy
    pi = scripted(tree, lambda pet: LIGHT_ON, lambda l, s: BOB_BAIL)
    assert policy_value(env, pi, tree)[0] == 0.5


def test_node_values_keyed_by_trajectory(toy):
    env, tree = toy
    pi = scripted(tree, lambda pet: REVEAL, guess_seen)
    _, values = policy_value(env, pi, tree)
    root = tree.trajectory(tree.roots[0])
    assert values[root.key] == pytest.approx(5.0)


def test_cross_value_mixes_roles(toy):
    env, tree = toy
    reveal = scripted(tree, lambda pet: REVEAL, guess_seen)
    bail = scripted(tree, lambda pet: ALICE_BAIL, lambda l, s: BOB_BAIL)
    assert cross_value(env, [reveal, bail], tree) == pytest.approx(-4.5)
    assert cross_value(env, [bail, reveal], tree) == 1.0


# -- counterfactual values ----------------------------------------------------

def test_alice_counterfactual_q(toy):
    env, tree = toy
    pi1, _ = obl_operator(env, Policy.uniform(), SolverSettings(), tree)
    q = counterfactual_q(env, Policy.uniform(), pi1, alice_aoh(tree, "cat"))
    assert q[REVEAL] == pytest.approx(5.0)
    assert q[ALICE_BAIL] == pytest.approx(1.0)
    assert q[LIGHT_ON] == pytest.approx(0.5)
    assert q[LIGHT_OFF] == pytest.approx(0.5)


def test_bob_counterfactual_q_after_reveal(toy):
    env, tree = toy
    rng = np.random.default_rng(1)
    h = bob_aoh(tree, ("off", "dog"))
    for _ in range(3):
        pi0 = random_full_support(tree, rng)
        q = counterfactual_q(env, pi0, pi0, h)
        assert q == pytest.approx({GUESS_DOG: 10.0, GUESS_CAT: -10.0, BOB_BAIL: 0.5})


def test_terminal_aoh_has_empty_q(toy):
    env, tree = toy
    pi = Policy.uniform()
    done = next(t for t in tree.trajectories() if t.actions[0] == ALICE_BAIL)
    from obl.env import aoh_of

    h = aoh_of(env, done, 0)
    assert counterfactual_q(env, pi, pi, h) == {}
    assert counterfactual_v(env, pi, pi, h) == 0.0


def test_operator_q_matches_belief_based_q(toy):
    env, tree = toy
    pi1, qt = obl_operator(env, Policy.uniform(), SolverSettings(), tree)
    for h in tree.groups:
        direct = counterfactual_q(env, Policy.uniform(), pi1, h)
        assert qt.row(h) == pytest.approx(direct, abs=1e-12)


def test_alice_counterfactual_v(toy):
    env, tree = toy
    pi1, _ = obl_operator(env, Policy.uniform(), SolverSettings(), tree)
    assert counterfactual_v(env, Policy.uniform(), pi1, alice_aoh(tree, "dog")) == pytest.approx(5.0)


@pytest.mark.parametrize("seed", range(5))
def test_v_is_policy_weighted_q(seed):
    env = random_game(seed)
    tree = enumerate_reachable(env)
    pi = random_full_support(tree, np.random.default_rng(seed))
    for h, ns in tree.groups.items():
        legal = tree.nodes[ns[0]].legal
        q = counterfactual_q(env, pi, pi, h)
        v = counterfactual_v(env, pi, pi, h)
        assert v == pytest.approx(sum(p * q[a] for a, p in zip(legal, pi.probs(h, legal))), abs=1e-12)


def test_point_mass_v_is_trajectory_value(toy):
    env, tree = toy
    pi = scripted(tree, lambda pet: REVEAL, guess_seen)
    h = bob_aoh(tree, ("off", "cat"))
    assert counterfactual_v(env, Policy.uniform(), pi, h) == pytest.approx(10.0)


# -- softmax and the operator -------------------------------------------------

def test_softmax_examples():
    assert softmax_policy([1.0, 0.0], 1.0) == pytest.approx([E / (E + 1), 1 / (E + 1)])
    assert softmax_policy([1.0, 0.0], 1.0) == pytest.approx([0.7311, 0.2689], abs=1e-4)
    assert softmax_policy([5.0, 5.0, 5.0], 0.3) == pytest.approx([1 / 3] * 3)
    assert list(softmax_policy([3.0, 7.0, 7.0], 0.0)) == [0.0, 1.0, 0.0]


def test_toy_obl1_reveals(toy):
    env, tree = toy
    pi1, _ = obl_operator(env, Policy.uniform(), SolverSettings(), tree)
    for pet in ("cat", "dog"):
        assert pi1.table[alice_aoh(tree, pet)] == {REVEAL: 1.0}
    assert pi1.table[bob_aoh(tree, ("off", "dog"))] == {GUESS_DOG: 1.0}
    assert pi1.table[bob_aoh(tree, ("on", None))] == {BOB_BAIL: 1.0}
    assert policy_value(env, pi1, tree)[0] == pytest.approx(5.0)


def test_operator_is_deterministic(toy):
    env, tree = toy
    a, _ = obl_operator(env, Policy.uniform(), SolverSettings(temperature=0.3), tree)
    b, _ = obl_operator(env, Policy.uniform(), SolverSettings(temperature=0.3), tree, order_seed=99)
    assert a.dumps() == b.dumps()


def test_low_temperature_close_to_argmax(toy):
    env, tree = toy
    hard, _ = obl_operator(env, Policy.uniform(), SolverSettings(), tree)
    soft, _ = obl_operator(env, Policy.uniform(), SolverSettings(temperature=0.01), tree)
    assert policy_distance(hard, soft, tree.groups.keys(), legal_map(tree)) < 0.01


def test_matrix_obl_breaks_tie_to_first_action():
    env = convert_simultaneous(matrix_game([[1, 0], [0, 1]]))
    tree = enumerate_reachable(env)
    pi, _ = obl_operator(env, Policy.uniform(), SolverSettings(), tree)
    (p1,), (p2,) = tree.aohs_of(0), tree.aohs_of(1)
    assert pi.table[p2] == {0: 1.0}
    assert pi.table[p1] == {0: 1.0}
    assert policy_value(env, pi, tree)[0] == 1.0
    assert pi.metadata["ties"] == 1


def test_hierarchy_toy_stays_at_five(toy):
    env, tree = toy
    levels = obl_hierarchy(env, Policy.uniform(), SolverSettings(), 4, tree)
    assert [pytest.approx(policy_value(env, p, tree)[0]) for p, _ in levels] == [5.0] * 4
    assert [p.metadata["level"] for p, _ in levels] == [1, 2, 3, 4]


def test_hierarchy_levels_zero():
    assert obl_hierarchy(ToyGame(), Policy.uniform(), levels=0) == []


@pytest.mark.parametrize("seed", range(10))
def test_hierarchy_improvement_bound(seed):
    env = random_game(seed)
    tree = enumerate_reachable(env)
    T = 0.2
    pi0 = random_full_support(tree, np.random.default_rng(seed))
    values = [policy_value(env, pi0, tree)[0]]
    values += [policy_value(env, p, tree)[0] for p, _ in obl_hierarchy(env, pi0, SolverSettings(temperature=T), 3, tree)]
    for a, b in zip(values, values[1:]):
        assert b >= a - E * T * env.t_max - 1e-9


def test_fixed_point_iteration_converges_on_toy(toy):
    env, tree = toy
    res = iterate_to_fixed_point(env, Policy.uniform(), SolverSettings(), tree=tree)
    assert res.converged and len(res.levels) == 2


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(temperature=-1)
    with pytest.raises(ValueError):
        SolverSettings(tie_break="first")


def test_qtable_roundtrip(tmp_path, toy):
    env, tree = toy
    _, q = obl_operator(env, Policy.uniform(), SolverSettings(), tree)
    q.save(tmp_path / "q.json")
    back = QTable.load(tmp_path / "q.json")
    assert back.to_json() == q.to_json()


def test_policy_roundtrip(tmp_path, toy):
    env, tree = toy
    pi, _ = obl_operator(env, Policy.uniform(), SolverSettings(temperature=0.5), tree)
    pi.save(tmp_path / "p.json")
    back = Policy.load(tmp_path / "p.json")
    assert back.dumps() == pi.dumps()
    assert back.digest() == pi.digest()


# -- best responses and the cognitive hierarchy ---------------------------------

def test_bob_best_response_to_uniform_alice(toy):
    env, tree = toy
    br = best_response(env, Policy.uniform(), 1, tree).policy
    assert br.table[bob_aoh(tree, ("on", None))] == {BOB_BAIL: 1.0}
    assert br.table[bob_aoh(tree, ("off", None))] == {BOB_BAIL: 1.0}
    assert br.table[bob_aoh(tree, ("off", "cat"))] == {GUESS_CAT: 1.0}
    assert br.table[bob_aoh(tree, ("off", "dog"))] == {GUESS_DOG: 1.0}


def test_alice_best_response_to_uniform_bob(toy):
    env, tree = toy
    br = best_response(env, Policy.uniform(), 0, tree)
    for pet in ("cat", "dog"):
        h = alice_aoh(tree, pet)
        assert br.policy.table[h] == {ALICE_BAIL: 1.0}
        assert br.aoh_values[h] == pytest.approx(1.0)
    # hand-computed alternatives: reveal -5 + (0.5 + 10 - 10)/3, a light (0.5 + 10 - 10)/3
    q = counterfactual_q(env, Policy.uniform(), Policy.uniform(), alice_aoh(tree, "cat"))
    assert q[REVEAL] == pytest.approx(-5 + 0.5 / 3)
    assert q[LIGHT_ON] == pytest.approx(0.5 / 3)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 5000), player=st.integers(0, 1), draw=st.integers(0, 2**31))
def test_best_response_never_hurts(seed, player, draw):
    env = random_game(seed, max_states=4, max_t=3)
    tree = enumerate_reachable(env)
    pi = random_full_support(tree, np.random.default_rng(draw))
    base = policy_value(env, pi, tree)[0]
    br = best_response(env, pi, player, tree)
    joint = combine({player: br.policy, 1 - player: pi})
    assert policy_value(env, joint, tree)[0] >= base - 1e-9
    assert br.value == pytest.approx(policy_value(env, joint, tree)[0], abs=1e-9)


def test_ch_level1_bails(toy):
    env, tree = toy
    (lvl1,) = k_level_hierarchy(env, Policy.uniform(), 1, tree)
    assert policy_value(env, lvl1, tree)[0] == 1.0
    for p in (0, 1):
        assert lvl1.restricted(p) == best_response(env, Policy.uniform(), p, tree).policy.table


def test_ch_rejects_k0():
    with pytest.raises(ValueError):
        k_level_hierarchy(ToyGame(), Policy.uniform(), 0)


# -- self-play baseline -------------------------------------------------------

def test_selfplay_toy_signals():
    env = ToyGame()
    pi = selfplay_train(env, 0)
    assert policy_value(env, pi)[0] == pytest.approx(10.0)
    assert pi.metadata["generator"] == "selfplay-seed-0"


def test_selfplay_is_seeded():
    env = ToyGame()
    cfg = {"episodes": 2000}
    assert selfplay_train(env, 4, cfg).dumps() == selfplay_train(env, 4, cfg).dumps()
