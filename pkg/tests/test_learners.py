import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stackelberg_noregret import _kernels as K
from stackelberg_noregret.games import MatrixGame, list_builtin, load_builtin, normalize
from stackelberg_noregret.learners import (
    FollowerLearner,
    LeaderLearner,
    ScheduleMask,
    commitment_grid,
    default_step_size,
    follower_act,
    follower_update,
    leader_act,
    leader_update,
    schedule_active,
)

PD = normalize(load_builtin("prisoners_dilemma"))
CHICKEN = normalize(load_builtin("chicken"))


def rng(seed=0):
    return np.random.default_rng(seed)


# ------------------------------------------------------------- step sizes


def test_default_step_size_value():
    assert default_step_size(2, 10_000) == pytest.approx(math.sqrt(8 * math.log(2) / 10_000))
    assert default_step_size(2, 10_000) == pytest.approx(0.02355, abs=5e-6)


def test_default_step_size_single_action_guard():
    v = default_step_size(1, 50)
    assert math.isfinite(v) and v > 0 and v == default_step_size(2, 50)


@given(st.integers(1, 10**7))
def test_default_step_size_sqrt_scaling(T):
    assert default_step_size(2, T) / default_step_size(2, 4 * T) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("n, T", [(0, 10), (2, 0)])
def test_default_step_size_rejects(n, T):
    with pytest.raises(ValueError):
        default_step_size(n, T)


# --------------------------------------------------------------- follower


def test_hedge_fresh_is_uniform():
    f = FollowerLearner("hedge", PD)
    np.testing.assert_allclose(f.probs(0), [0.5, 0.5])
    counts = np.bincount([follower_act(f, 0, rng(s)) for s in range(4000)], minlength=2)
    assert abs(counts[0] / 4000 - 0.5) < 0.03


def test_best_response_oracle_pd():
    f = FollowerLearner("best_response_oracle", PD)
    assert all(follower_act(f, 0, rng(s)) == 1 for s in range(20))


def test_hedge_single_action():
    g = MatrixGame("one", [[0.5], [0.1]], [[0.2], [-0.3]])
    f = FollowerLearner("hedge", g)
    r = rng()
    for _ in range(50):
        j = follower_act(f, 1, r)
        assert j == 0
        follower_update(f, 1, j, g, True)


def test_hedge_zero_step_keeps_weights():
    f = FollowerLearner("hedge", PD, step_size=0.0)
    before = f.weights(0).copy()
    for _ in range(10):
        follower_update(f, 0, 0, PD, True)
    np.testing.assert_array_equal(f.weights(0), before)
    np.testing.assert_allclose(f.probs(0), [0.5, 0.5])


@pytest.mark.parametrize("step", [None, 0.05])
def test_hedge_moves_monotonically_to_better_action(step):
    # context 0 of the normalized PD: follower payoffs (-1/4, 0)
    f = FollowerLearner("hedge", PD, step_size=step)
    last = f.probs(0)[1]
    for _ in range(2000):
        follower_update(f, 0, 0, PD, True)
        p = f.probs(0)[1]
        assert p > last
        last = p
    assert last > 0.99


def test_hedge_closed_form_weight_ratio():
    eta, t = 0.1, 37
    f = FollowerLearner("hedge", PD, step_size=eta)
    for _ in range(t):
        follower_update(f, 0, 1, PD, True)
    # losses (1 - r)/2: (1.25/2, 1/2); ratio exp(eta * t * 0.125)
    w = f.weights(0)
    assert w[1] / w[0] == pytest.approx(math.exp(eta * t * 0.125), rel=1e-12)


@pytest.mark.parametrize("algo", ["hedge", "exp3", "regret_matching", "greedy_q"])
def test_inactive_update_is_identity(algo):
    f = FollowerLearner(algo, CHICKEN)
    r = rng(3)
    for _ in range(30):
        i = int(r.integers(2))
        follower_update(f, i, follower_act(f, i, r), CHICKEN, True)
    table, counts = f.state()
    for _ in range(40):
        i = int(r.integers(2))
        follower_update(f, i, follower_act(f, i, r), CHICKEN, False)
    if algo == "greedy_q":
        # the baseline follower is not governed by the schedule
        assert not np.array_equal(f.state()[0], table)
    else:
        np.testing.assert_array_equal(f.state()[0], table)
        np.testing.assert_array_equal(f.state()[1], counts)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["hedge", "exp3", "regret_matching"]), st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=40))
def test_masked_updates_compose_to_identity(algo, pairs):
    f = FollowerLearner(algo, CHICKEN)
    table, counts = f.state()
    for i, j in pairs:
        follower_update(f, i, j, CHICKEN, False)
    assert np.array_equal(f.state()[0], table) and np.array_equal(f.state()[1], counts)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["hedge", "exp3", "regret_matching"]), st.integers(0, 2**32 - 1), st.sampled_from(list_builtin()))
def test_probabilities_are_distributions(algo, seed, name):
    g = normalize(load_builtin(name))
    f = FollowerLearner(algo, g)
    r = rng(seed)
    for _ in range(200):
        i = int(r.integers(2))
        p = f.probs(i)
        assert (p >= 0).all() and abs(p.sum() - 1) <= 1e-9
        if algo == "hedge":
            assert (f.weights(i) > 0).all()
        follower_update(f, i, follower_act(f, i, r), g, True)


def test_exp3_mixes_in_exploration():
    f = FollowerLearner("exp3", PD, exploration=0.2, step_size=1.0)
    for _ in range(200):
        follower_update(f, 0, 1, PD, True)
        follower_update(f, 0, 0, PD, True)
    assert f.probs(0).min() >= 0.1 - 1e-12


def test_exp3_unbiased_update_on_chosen_action_only():
    f = FollowerLearner("exp3", PD, exploration=0.0, step_size=0.0)
    follower_update(f, 0, 1, PD, True)
    # loss of action 1 in context 0 is (1 - 0)/2 = 0.5, divided by p = 0.5
    np.testing.assert_allclose(f.state()[0][0], [0.0, 1.0])


def test_regret_matching_tracks_regrets():
    f = FollowerLearner("regret_matching", PD)
    follower_update(f, 0, 0, PD, True)
    np.testing.assert_allclose(f.state()[0][0], [0.0, 0.25])
    np.testing.assert_allclose(f.probs(0), [0.0, 1.0])


def test_greedy_q_argmax_and_update():
    f = FollowerLearner("greedy_q", PD, learning_rate=1.0)
    assert follower_act(f, 0, rng()) == 0  # all-zero table: lowest index
    follower_update(f, 0, 0, PD, True)
    assert f.state()[0][0, 0] == PD.follower_payoff[0, 0]
    assert follower_act(f, 0, rng()) == 1


def test_hedge_rejects_raw_game():
    with pytest.raises(ValueError):
        FollowerLearner("hedge", load_builtin("prisoners_dilemma"))
    f = FollowerLearner("hedge", PD)
    with pytest.raises(ValueError):
        follower_update(f, 0, 0, load_builtin("prisoners_dilemma"), True)


def test_follower_rejects_out_of_range():
    f = FollowerLearner("hedge", PD)
    with pytest.raises(IndexError):
        follower_act(f, 2, rng())
    with pytest.raises(IndexError):
        follower_update(f, 0, 5, PD, True)
    with pytest.raises(ValueError):
        FollowerLearner("ucb", PD)


def test_same_seed_same_actions():
    def play(seed):
        f = FollowerLearner("hedge", CHICKEN)
        r = rng(seed)
        out = []
        for t in range(300):
            j = follower_act(f, t % 2, r)
            follower_update(f, t % 2, j, CHICKEN, True)
            out.append(j)
        return out

    assert play(5) == play(5)
    assert play(5) != play(6)


@settings(max_examples=30, deadline=None)
@given(
    st.sampled_from(list_builtin()),
    st.lists(st.integers(0, 1), min_size=1, max_size=1500),
    st.integers(0, 2**32 - 1),
)
def test_hedge_per_context_regret_bound(name, script, seed):
    g = normalize(load_builtin(name))
    f = FollowerLearner("hedge", g)
    r = rng(seed)
    best = g.follower_payoff.max(axis=1)
    regret = np.zeros(2)
    seen = np.zeros(2)
    for i in script:
        j = follower_act(f, i, r)
        follower_update(f, i, j, g, True)
        regret[i] += best[i] - g.follower_payoff[i, j]
        seen[i] += 1
        assert regret[i] <= math.sqrt(2 * seen[i] * math.log(2)) + 1e-9


# ----------------------------------------------------------------- leader


def test_fixed_commitment_pure():
    ld = LeaderLearner("fixed_commitment", PD, commitment=[1, 0])
    r = rng()
    for _ in range(50):
        arm, a = leader_act(ld, [], r)
        assert (arm, a) == (0, 0)
        table = ld.state()
        leader_update(ld, arm, -0.5)
        assert all(np.array_equal(x, y) for x, y in zip(table, ld.state()))


def test_exp3_single_arm():
    ld = LeaderLearner("exp3_commitment_grid", PD, arms=[[0.0, 1.0]])
    r = rng()
    for _ in range(50):
        arm, a = leader_act(ld, [], r)
        assert (arm, a) == (0, 1)
        leader_update(ld, arm, -0.5)


def test_q_memory_full_exploration_is_uniform():
    ld = LeaderLearner("q_memory", CHICKEN, exploration=1.0)
    np.testing.assert_allclose(ld.probs(), [0.5, 0.5])
    r = rng(1)
    counts = np.bincount([leader_act(ld, [], r)[1] for _ in range(4000)], minlength=2)
    assert abs(counts[0] / 4000 - 0.5) < 0.03


@pytest.mark.parametrize("estimator", ["action", "arm"])
def test_exp3_equal_rewards_stay_balanced(estimator):
    # symmetric arms and a constant reward: no arm should be preferred on average
    finals = []
    for seed in range(20):
        ld = LeaderLearner(
            "exp3_commitment_grid", PD, arms=[[1.0, 0.0], [0.0, 1.0]], estimator=estimator, exploration=0.05
        )
        r = rng(seed)
        for _ in range(500):
            arm, _ = leader_act(ld, [], r)
            leader_update(ld, arm, -0.25)
        finals.append(ld.probs()[0])
    assert abs(np.mean(finals) - 0.5) < 0.1
    assert min(finals) >= 0.025 - 1e-12  # exploration floor


def test_q_memory_full_overwrite():
    ld = LeaderLearner("q_memory", PD, learning_rate=1.0, exploration=0.0)
    r = rng()
    for reward in (-0.5, 0.25, -0.75):
        arm, a = leader_act(ld, [], r)
        leader_update(ld, arm, reward)
        assert ld.state()[0][0, a] == reward


def test_leader_rejects_bad_inputs():
    with pytest.raises(ValueError):
        LeaderLearner("exp3_commitment_grid", PD, arms=np.zeros((0, 2)))
    with pytest.raises(ValueError):
        LeaderLearner("exp3_commitment_grid", PD, arms=[[0.3, 0.3]])
    with pytest.raises(ValueError):
        LeaderLearner("fixed_commitment", PD)
    ld = LeaderLearner("exp3_commitment_grid", PD)
    leader_act(ld, [], rng())
    with pytest.raises(ValueError):
        leader_update(ld, 0, 1.5)


def test_action_estimator_matches_expected_loss():
    # E[table increment] for each arm equals its expected loss
    ld = LeaderLearner("exp3_commitment_grid", PD, arms=[[1.0, 0.0], [0.3, 0.7], [0.0, 1.0]], step_size=0.0)
    losses = np.array([0.2, 0.8])  # per pure action
    p = ld.probs()
    q = p @ ld.arms
    expected = np.zeros(3)
    for a in range(2):
        expected += q[a] * ld.arms[:, a] * losses[a] / q[a]
    np.testing.assert_allclose(expected, ld.arms @ losses)
    # and the kernel performs exactly that increment
    ld._action = 1
    leader_update(ld, 0, 1 - 2 * losses[1])
    np.testing.assert_allclose(ld.state()[0][0], ld.arms[:, 1] * losses[1] / q[1])


def test_commitment_grid():
    g = commitment_grid(2)
    assert g.shape == (101, 2)
    np.testing.assert_allclose(g[0], [0, 1])
    np.testing.assert_allclose(g[100], [1, 0])
    g3 = commitment_grid(3, 4)
    assert g3.shape == (15, 3)
    np.testing.assert_allclose(g3.sum(axis=1), 1)


def test_memory_context_encoding():
    ld = LeaderLearner("q_memory", PD, memory_length=2)
    base = PD.m * PD.n + 1
    assert ld.n_contexts == base**2
    assert ld.context([]) == (base - 1) + (base - 1) * base
    # oldest first: code(1,0)=2, code(0,1)=1
    assert ld.context([(0, 0), (1, 0), (0, 1)]) == 2 + 1 * base
    assert LeaderLearner("fixed_commitment", PD, commitment=[1, 0], memory_length=3).memory_length == 0


@given(st.lists(st.integers(0, 3), min_size=0, max_size=6), st.integers(1, 3))
def test_memory_contexts_are_distinct(codes, L):
    ld = LeaderLearner("q_memory", PD, memory_length=L)
    mem = [(c // 2, c % 2) for c in codes]
    c = ld.context(mem)
    assert 0 <= c < ld.n_contexts
    recent = codes[-L:]
    padded = [4] * (L - len(recent)) + recent
    assert c == sum(v * 5**k for k, v in enumerate(padded))


# --------------------------------------------------------------- schedule


def test_schedule_examples():
    after = ScheduleMask("after_k", 100, 100)
    assert not schedule_active(after, 9999) and schedule_active(after, 10_000)
    assert schedule_active(ScheduleMask("every_k", 100), 0)
    assert schedule_active(ScheduleMask("always"), 123456)
    assert not schedule_active(ScheduleMask("never"), 0)


def test_every_k_epochs():
    m = ScheduleMask("every_k", 3, 10)
    active = [schedule_active(m, t) for t in range(70)]
    assert active == [(t // 10) % 3 == 0 for t in range(70)]


@given(
    st.sampled_from(["always", "every_k", "after_k", "never"]),
    st.integers(1, 50),
    st.integers(1, 200),
    st.integers(0, 10**7),
)
def test_schedule_kernel_agrees(kind, k, ep, t):
    m = ScheduleMask(kind, k, ep)
    epoch = t // ep
    expected = {"always": True, "never": False, "every_k": epoch % k == 0, "after_k": epoch >= k}[kind]
    assert schedule_active(m, t) == expected == K.schedule_active(m.code, k, ep, t)


@pytest.mark.parametrize("kw", [{"kind": "sometimes"}, {"k": 0}, {"epoch_length": 0}])
def test_schedule_validation(kw):
    with pytest.raises(ValueError):
        ScheduleMask(**kw)


def test_sample_boundary():
    p = np.array([0.5, 0.5, 0.0])
    assert K.sample(p, 0.0) == 0
    assert K.sample(p, np.nextafter(1.0, 0.0)) == 1
