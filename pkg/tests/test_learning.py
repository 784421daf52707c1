import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jamnet.alp import run_alp
from jamnet.learning import (
    Comparison, EpsilonFirstScheduler, EstimatorState, ExplorationClampWarning, GreedyPolicy,
    UniformRandomPolicy, cle_should_stop, delta_star, explore_step, exploit_step, exploration_length,
    ranking_correct, run_policy, run_ucb_ailp, simulate_eps_first_batch,
)
from jamnet.wpt_env import WptEnvironment

ENV_A = WptEnvironment(pi=[0.5, 0.5], means=[[0.6, 0.8], [0.4, 0.5]], costs=[[1, 2], [1, 2]])
ENV_EASY = WptEnvironment(pi=[1.0], means=[[0.9, 0.5]], costs=[[1, 2]])


def test_exploration_length_example_is_clamped():
    with pytest.warns(ExplorationClampWarning):
        assert exploration_length(300, 2, 0.5, 0.5, 0.5) == 300
    # unclamped value of the same formula
    raw = math.ceil(2 / (0.5 * 0.5) + math.log(300) * max(4, 16 * 2 / (0.5 * 0.5 * 0.25)))
    assert raw == 2929


def test_exploration_length_limits():
    T, K, d, pm = 10**6, 2, 0.5, 0.5
    assert exploration_length(T, K, d, pm, math.inf) == math.ceil(K / ((1 - d) * pm) + math.log(T) / d ** 2)
    with pytest.raises(ValueError):
        exploration_length(T, K, d, pm, 0.0)


@pytest.mark.filterwarnings("ignore::jamnet.learning.ExplorationClampWarning")
@settings(max_examples=60, deadline=None)
@given(K=st.integers(1, 5), d=st.floats(0.05, 0.95), pm=st.floats(0.05, 1), ds=st.floats(0.01, 5))
def test_exploration_length_monotone_in_K(K, d, pm, ds):
    T = 10**9
    assert exploration_length(T, 2 * K, d, pm, ds) >= exploration_length(T, K, d, pm, ds)


def test_explore_step_examples():
    state = EstimatorState.empty(1, 3)
    state.counts[0] = [3, 1, 2]
    assert explore_step(state, 0, 0.7) == 2
    fresh = EstimatorState.empty(1, 4)
    picks = [explore_step(fresh, 0, u) for u in (np.arange(4000) + 0.5) / 4000]
    assert np.bincount(picks, minlength=5)[1:].tolist() == [1000] * 4


def test_round_robin_coverage():
    state = EstimatorState.empty(2, 3)
    rng = np.random.default_rng(0)
    for _ in range(3 * 5):
        arm = explore_step(state, 1, rng.random())
        state.update(1, arm, rng.random())
    assert state.counts[1].tolist() == [5, 5, 5]
    assert state.counts[0].sum() == 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(1, 3), st.floats(0, 1)), min_size=1, max_size=60))
def test_incremental_mean_matches_batch(obs):
    state = EstimatorState.empty(2, 3)
    for k, arm, y in obs:
        state.update(k, arm, y)
    for k in range(2):
        for arm in range(1, 4):
            ys = [y for kk, a, y in obs if (kk, a) == (k, arm)]
            if ys:
                assert state.emp_means[k, arm - 1] == pytest.approx(np.mean(ys), abs=1e-12)


def test_cle_examples():
    # eps gap 0.6 with cost gap 1 gives d = 0.3
    cmp = [Comparison(0.9, 0.3, (60, 60), (60, 60))]
    assert cle_should_stop(100, cmp, 1.0)
    assert math.exp(-2 * 0.3 ** 2 * 60) == pytest.approx(2.04e-5, rel=0.01)
    assert not cle_should_stop(100, [Comparison(0.5, 0.5, (10**9, 10**9), (10**9, 10**9))], 1.0)
    assert cle_should_stop(10**6, [Comparison(0.5, 0.49, (10**12, 10**12), (10**12, 10**12))], 1.0)
    assert not cle_should_stop(100, [Comparison(0.9, 0.3, (0, 60), (60, 60))], 1.0)


def test_delta_star_and_ranking():
    ds = delta_star(ENV_EASY.means, ENV_EASY.costs)
    assert ds == pytest.approx(1.0 * 0.65)
    assert ranking_correct(ENV_EASY.means, ENV_EASY.means, ENV_EASY.costs)
    swapped = np.array([[0.3, 0.9]])
    assert not ranking_correct(swapped, ENV_EASY.means, ENV_EASY.costs)
    batch = np.stack([ENV_EASY.means, swapped])
    assert ranking_correct(batch, ENV_EASY.means, ENV_EASY.costs).tolist() == [True, False]


def test_revealed_means_reproduce_alp():
    a = run_alp(ENV_A, 500, 300.0, np.random.default_rng(9))
    b, _ = run_ucb_ailp(ENV_A, 500, 300.0, EpsilonFirstScheduler(), np.random.default_rng(9), reveal_means=True)
    np.testing.assert_array_equal(a.action, b.action)
    np.testing.assert_array_equal(a.reward, b.reward)
    assert b.exploration_length == 0


def test_exploit_step_with_true_means_matches_alp_rule():
    from jamnet.alp import AlpScheduler
    sched = AlpScheduler().fit(ENV_A.means, ENV_A.costs, ENV_A.pi)
    state = EstimatorState(np.ones((2, 2), dtype=np.int64), ENV_A.means.copy())
    budget = ENV_A.new_state(100, 50.0)
    for k in (0, 1):
        for u in np.linspace(0, 0.999, 25):
            assert exploit_step(state, budget, k, ENV_A.costs, ENV_A.pi, u) == sched.act(k, budget, float(u))
    assert exploit_step(state, ENV_A.new_state(100, 0.0), 0, ENV_A.costs, ENV_A.pi, 0.5) == 0


def test_flipped_estimates_still_give_valid_episode():
    sched = EpsilonFirstScheduler(eps_T=2)
    traj, regret = run_ucb_ailp(ENV_A, 200, 100.0, sched, np.random.default_rng(1))
    assert len(traj) == 200 and math.isfinite(regret)
    assert np.all(traj.remaining_budget >= 0)


def test_cle_stops_early_and_agrees_with_fixed_run_before_cutoff():
    T, budget = 3000, 2250.0
    cle, _ = run_ucb_ailp(ENV_EASY, T, budget, EpsilonFirstScheduler(exploration="cle"), np.random.default_rng(1))
    fixed, _ = run_ucb_ailp(ENV_EASY, T, budget, EpsilonFirstScheduler(eps_T=400), np.random.default_rng(1))
    assert cle.exploration_length < T
    m = min(cle.exploration_length, fixed.exploration_length)
    np.testing.assert_array_equal(cle.action[:m], fixed.action[:m])


def test_exploration_spend_is_bounded():
    T, eps = 1000, 120
    traj, _ = run_ucb_ailp(ENV_A, T, 500.0, EpsilonFirstScheduler(eps_T=eps), np.random.default_rng(4))
    assert 500.0 - traj.remaining_budget[eps - 1] <= eps * ENV_A.c_max + 1e-9


def test_batch_of_one_equals_scalar():
    T, budget, eps = 300, 225.0, 50
    traj, _ = run_ucb_ailp(ENV_EASY, T, budget, EpsilonFirstScheduler(eps_T=eps), np.random.default_rng(3))
    batch = simulate_eps_first_batch(ENV_EASY, T, budget, 1, eps, np.random.default_rng(3))
    assert batch.reward[0] == pytest.approx(traj.total_reward)
    assert batch.final_budget[0] == pytest.approx(traj.remaining_budget[-1])


def test_baselines():
    env = WptEnvironment(pi=[1.0], means=[[0.2, 0.9]], costs=[[0.3, 1.0]])
    T, budget = 400, 0.4 * 400
    greedy = run_policy(env, T, budget, GreedyPolicy(), np.random.default_rng(0))
    # greedy spends 1 per slot on the best arm and runs dry long before T
    assert greedy.remaining_budget[int(budget) + 1] == pytest.approx(0.0)
    rnd = run_policy(env, T, budget, UniformRandomPolicy(), np.random.default_rng(0))
    assert set(np.unique(rnd.action[: T // 4])) <= {1, 2}
    learn = run_policy(env, T, budget, GreedyPolicy(), np.random.default_rng(0), reveal_means=False)
    assert len(learn) == T


def test_uniform_random_regret_grows_linearly():
    env = WptEnvironment(pi=[1.0], means=[[0.2, 0.9]], costs=[[0.3, 1.0]])
    regrets = []
    for T in (500, 1000, 2000, 4000):
        reps = [T * env.lp_value(0.9) - run_policy(env, T, 0.9 * T, UniformRandomPolicy(),
                                                   np.random.default_rng(s)).total_reward for s in range(5)]
        regrets.append(np.mean(reps))
    slope = np.polyfit(np.log([500, 1000, 2000, 4000]), np.log(regrets), 1)[0]
    assert 0.85 <= slope <= 1.15


def test_scheduler_params():
    s = EpsilonFirstScheduler(exploration="cle", delta=0.3)
    assert s.get_params()["exploration"] == "cle"
    with pytest.raises(ValueError):
        EpsilonFirstScheduler(exploration="nope").fit(ENV_A.costs, ENV_A.pi, 100)
    with pytest.raises(ValueError):
        EpsilonFirstScheduler().fit(ENV_A.costs, ENV_A.pi, 100)
