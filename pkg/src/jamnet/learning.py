"""Unknown-statistics scheduling: explore-first with round-robin coverage, then ALP on estimates.

Exploration either lasts a fixed number of slots given by
:func:`exploration_length` or stops once every comparison the LP solve
relies on passes a Hoeffding-style confidence test (CLE).
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_matrix, check_probability_vector, check_random_state, check_unit_interval
from .alp import BatchResult, ThresholdPlan, candidate_set, lp_dual_price
from .wpt_env import Trajectory


class ExplorationClampWarning(UserWarning):
    """The requested exploration length exceeded the horizon and was clamped."""


def exploration_length(T, K, delta, pi_min, delta_star):
    """Exploration slots ``ceil(K/((1-d) pi_min) + ln T max{1/d^2, 16K/((1-d) pi_min D*^2)})``.

    ``delta_star`` may be ``math.inf``. The result is clamped to ``T``
    with an :class:`ExplorationClampWarning`.
    """
    if T < 1 or K < 1:
        raise ValueError("T and K must be positive")
    check_unit_interval(delta, "delta")
    if not 0 < pi_min <= 1:
        raise ValueError("pi_min must lie in (0, 1]")
    if not delta_star > 0:
        raise ValueError("delta_star must be positive; use CLE stopping when it is unknown")
    base = K / ((1 - delta) * pi_min)
    second = 16 * K / ((1 - delta) * pi_min * delta_star ** 2)
    eps = math.ceil(base + math.log(T) * max(1 / delta ** 2, second))
    if eps > T:
        warnings.warn(f"exploration length {eps} clamped to horizon {T}", ExplorationClampWarning, stacklevel=2)
        eps = T
    return int(eps)


def _slopes(means, costs):
    """All ``(k, j1, j2, eps)`` with ``j1 < j2`` over padded arms (0 = dummy) and distinct costs."""
    K, J = means.shape
    u = np.hstack([np.zeros((K, 1)), means])
    c = np.hstack([np.zeros((K, 1)), costs])
    out = []
    for k in range(K):
        for j1, j2 in itertools.combinations(range(J + 1), 2):
            if c[k, j1] != c[k, j2]:
                out.append((k, j1, j2, (u[k, j1] - u[k, j2]) / (c[k, j1] - c[k, j2])))
    return out


def delta_star(means, costs):
    """``Delta_min^(c) * Delta_min^(eps)`` computed from the true statistics."""
    means = np.asarray(means, dtype=float)
    costs = np.asarray(costs, dtype=float)
    K = means.shape[0]
    c = np.hstack([np.zeros((K, 1)), costs])
    dc = min(abs(c[k, a] - c[k, b]) for k in range(K) for a, b in itertools.combinations(range(c.shape[1]), 2))
    eps = np.array([s[3] for s in _slopes(means, costs)])
    if eps.size < 2:
        return math.inf
    de = np.min(np.abs(eps[:, None] - eps[None, :])[np.triu_indices(eps.size, 1)])
    return float(dc * de)


def ranking_correct(est_means, means, costs):
    """True when every strictly ordered pair of slopes keeps its order under the estimates."""
    true = np.array([s[3] for s in _slopes(means, costs)])
    est = np.asarray(est_means, dtype=float)
    batch = est.reshape((-1,) + np.shape(means))
    out = np.empty(batch.shape[0], dtype=bool)
    lo, hi = np.nonzero(true[:, None] < true[None, :])
    for r, m in enumerate(batch):
        e = np.array([s[3] for s in _slopes(m, costs)])
        out[r] = bool(np.all(e[lo] < e[hi]))
    return out if est.ndim == 3 else bool(out[0])


@dataclass
class EstimatorState:
    """Sample counts ``C[k, j]`` and running means for arms ``1..J`` (0-based columns)."""

    counts: np.ndarray
    emp_means: np.ndarray

    @classmethod
    def empty(cls, K, J):
        return cls(np.zeros((K, J), dtype=np.int64), np.zeros((K, J)))

    def update(self, k, arm, y):
        j = arm - 1
        self.counts[k, j] += 1
        n = self.counts[k, j]
        self.emp_means[k, j] = ((n - 1) * self.emp_means[k, j] + y) / n


def explore_step(state, k, u):
    """Least-sampled arm for context ``k``; ties split uniformly using ``u``."""
    c = state.counts[k]
    tied = np.flatnonzero(c == c.min())
    return int(tied[min(int(u * tied.size), tied.size - 1)]) + 1


class Comparison(NamedTuple):
    eps1: float
    eps2: float
    counts1: Tuple[float, float]
    counts2: Tuple[float, float]


def cle_should_stop(T, comparisons, delta_c_min):
    """Confidence test over all comparisons; a zero count fails its comparison."""
    bound = float(T) ** -2
    for cmp in comparisons:
        d = delta_c_min * abs(cmp.eps1 - cmp.eps2) / 2.0
        for counts in (cmp.counts1, cmp.counts2):
            n = min(counts)
            if n <= 0 or math.exp(-2.0 * d * d * n) > bound:
                return False
    return True


def cle_comparisons(est_means, counts, costs):
    """Comparisons consulted when pruning and sorting on estimated means.

    Covers adjacent pairs in each context's ``u/c`` order, the domination
    tests, every rate-sweep contest and adjacent virtual arms in the global
    order. Slopes are keyed by padded arm pairs; the dummy has infinite count.
    """
    K, J = est_means.shape
    cnt = np.hstack([np.full((K, 1), np.inf), counts.astype(float)])
    u = np.hstack([np.zeros((K, 1)), est_means])
    c = np.hstack([np.zeros((K, 1)), costs])

    def slope(k, a, b):
        return (u[k, a] - u[k, b]) / (c[k, a] - c[k, b]), (cnt[k, a], cnt[k, b])

    out = []
    virtual = []
    for k in range(K):
        eta = est_means[k] / costs[k]
        order = sorted(range(J), key=lambda i: (-eta[i], costs[k, i], i))
        for a, b in zip(order, order[1:]):
            out.append(Comparison(*_pair(slope(k, a + 1, 0), slope(k, b + 1, 0))))
        for a, b in itertools.combinations(order, 2):
            if costs[k, a] != costs[k, b]:
                # reward domination is the sign of the pair's slope
                s, n = slope(k, a + 1, b + 1)
                out.append(Comparison(s, 0.0, n, (math.inf, math.inf)))
        kept, best_u = [], 0.0
        for i in order:
            if est_means[k, i] > best_u:
                kept.append(i)
                best_u = est_means[k, i]
        a = 0
        while a < len(kept) - 1:
            rates = [slope(k, kept[b] + 1, kept[a] + 1) for b in range(a + 1, len(kept))]
            win = max(range(len(rates)), key=lambda i: (rates[i][0], i))
            out.extend(Comparison(*_pair(rates[win], r)) for i, r in enumerate(rates) if i != win)
            a += win + 1
        cs = candidate_set(costs[k], est_means[k], k)
        prev = 0
        for a in cs.arms:
            virtual.append((slope(k, a, prev), k))
            prev = a
    virtual.sort(key=lambda v: -v[0][0])
    for (s1, _), (s2, _) in zip(virtual, virtual[1:]):
        out.append(Comparison(*_pair(s1, s2)))
    return out


def _pair(first, second):
    return first[0], second[0], first[1], second[1]


class EpsilonFirstScheduler(BaseEstimator):
    """Explore-first scheduler: round-robin exploration, then ALP on empirical means.

    Parameters
    ----------
    exploration : {"fixed", "cle"}
        Fixed-length exploration or confidence-level stopping.
    eps_T : int or None
        Exploration length for ``fixed``; computed from ``delta`` and
        ``delta_star`` when None.
    delta : float
        Confidence parameter of the exploration-length formula.
    delta_star : float or None
        Separation constant; required for ``fixed`` without ``eps_T``.
    ucb_bonus : bool
        Add ``sqrt(2 ln t / C)`` to the estimates before exploiting.
    """

    def __init__(self, exploration="fixed", eps_T=None, delta=0.5, delta_star=None, ucb_bonus=False):
        self.exploration = exploration
        self.eps_T = eps_T
        self.delta = delta
        self.delta_star = delta_star
        self.ucb_bonus = ucb_bonus

    def fit(self, costs, pi, T, means=None):
        """Prepare for an episode of ``T`` slots.

        Passing ``means`` reveals the statistics: exploration is skipped and
        the scheduler behaves exactly like known-statistics ALP.
        """
        if self.exploration not in ("fixed", "cle"):
            raise ValueError("exploration must be 'fixed' or 'cle'")
        pi = check_probability_vector(pi)
        costs = check_matrix(costs, "costs", shape=(pi.size, np.shape(costs)[1]), low=0.0, strict_low=True)
        K, J = costs.shape
        self.costs_, self.pi_, self.T_ = costs, pi, int(T)
        self.c_max_ = float(costs.max())
        c = np.hstack([np.zeros((K, 1)), costs])
        self.delta_c_min_ = min(abs(c[k, a] - c[k, b]) for k in range(K)
                                for a, b in itertools.combinations(range(J + 1), 2))
        self.state_ = EstimatorState.empty(K, J)
        self.plan_ = None
        if means is not None:
            self.state_.emp_means[:] = check_matrix(means, "means", shape=costs.shape, low=0.0, high=1.0)
            self.explore_len_ = 0
            self._build_plan()
        elif self.exploration == "fixed":
            if self.eps_T is not None:
                self.explore_len_ = min(int(self.eps_T), self.T_)
            else:
                if self.delta_star is None:
                    raise ValueError("fixed exploration needs eps_T or delta_star")
                self.explore_len_ = exploration_length(self.T_, K, self.delta, pi.min(), self.delta_star)
        else:
            self.explore_len_ = None
        return self

    @property
    def exploring(self):
        return self.plan_ is None

    def _build_plan(self, t=None):
        means = self.state_.emp_means.copy()
        if self.ucb_bonus and t is not None:
            n = self.state_.counts
            with np.errstate(divide="ignore"):
                bonus = np.where(n > 0, np.sqrt(2 * math.log(max(t, 2)) / np.maximum(n, 1)), 0.0)
            means = np.minimum(means + bonus, 1.0)
        self.plan_ = ThresholdPlan.from_stats(self.pi_, means, self.costs_)

    def _maybe_stop(self, t):
        """Switch to exploitation before slot ``t`` when exploration is over."""
        if not self.exploring:
            return
        if self.exploration == "fixed" or self.explore_len_ is not None:
            if t > self.explore_len_:
                self._build_plan(t)
        elif t > self.T_:
            self.explore_len_ = self.T_

    def act(self, context, state, u):
        t = state.t
        self._maybe_stop(t)
        if state.remaining_budget <= 0:
            return 0
        if self.exploring:
            return explore_step(self.state_, context, u)
        rho = min(max(state.remaining_budget / state.remaining_time, 0.0), self.c_max_)
        return self.plan_.sample(context, rho, u)

    def update(self, context, arm, reward, t):
        """Record an exploration observation made in slot ``t``."""
        if not self.exploring or arm == 0:
            return
        self.state_.update(context, arm, reward)
        if self.exploration == "cle" and self.explore_len_ is None:
            cmps = cle_comparisons(self.state_.emp_means, self.state_.counts, self.costs_)
            if cle_should_stop(self.T_, cmps, self.delta_c_min_):
                self.explore_len_ = int(t)


def exploit_step(state, budget_state, context, costs, pi, u):
    """One exploitation decision from the current estimates (unsampled arms count as zero)."""
    if budget_state.remaining_budget <= 0:
        return 0
    plan = ThresholdPlan.from_stats(pi, state.emp_means, costs)
    rho = min(max(budget_state.remaining_budget / budget_state.remaining_time, 0.0), float(np.max(costs)))
    return plan.sample(context, rho, u)


def run_ucb_ailp(env, T, budget, scheduler=None, rng=None, reveal_means=False):
    """Run one explore-then-exploit episode; returns ``(trajectory, pseudo_regret)``."""
    from .wpt_env import pseudo_regret

    rng = check_random_state(rng)
    if scheduler is None:
        scheduler = EpsilonFirstScheduler(exploration="cle")
    scheduler.fit(env.costs, env.pi, T, means=env.means if reveal_means else None)
    state = env.new_state(T, budget)
    outcomes = []
    for _ in range(T):
        U = rng.random(3)
        k = int(env.context_from_uniform(U[0]))
        t = state.t
        arm = scheduler.act(k, state, float(U[1]))
        outcome, state = env.step(state, k, arm, float(U[2]))
        scheduler.update(k, outcome.action, outcome.reward, t)
        outcomes.append(outcome)
    explore = scheduler.explore_len_ if scheduler.explore_len_ is not None else T
    traj = Trajectory.from_outcomes(outcomes, exploration_length=int(explore))
    return traj, pseudo_regret(traj, env, T, budget)


def simulate_eps_first_batch(env, T, budget, replications, eps_T, rng=None):
    """Vectorised fixed-length explore-first runs sharing one generator.

    ``extra["ranking_correct"]`` records, per replication, whether the
    estimates at the end of exploration order every slope correctly.
    """
    rng = check_random_state(rng)
    R, K, J = int(replications), env.n_contexts, env.n_arms
    eps_T = min(int(eps_T), T)
    C, cmax = env.padded_costs, env.c_max
    tol = env.budget_tol(budget)
    rows = np.arange(R)
    b = np.full(R, float(budget))
    reward, mean_reward = np.zeros(R), np.zeros(R)
    counts = np.zeros((R, K), dtype=np.int64)
    n = np.zeros((R, K, J), dtype=np.int64)
    means = np.zeros((R, K, J))
    coerced = np.zeros(R, dtype=np.int64)

    def settle(k, arm, U):
        nonlocal b
        cost = C[k, arm]
        bad = cost > b + tol
        coerced[:] += bad
        arm = np.where(bad, 0, arm)
        cost = np.where(bad, 0.0, cost)
        y = env.reward_from_uniform(k, arm, U)
        b = np.maximum(b - cost, 0.0)
        return arm, y

    for t in range(eps_T):
        U = rng.random((R, 3))
        k = env.context_from_uniform(U[:, 0])
        ck = n[rows, k]
        tied = ck == ck.min(axis=1, keepdims=True)
        n_tied = tied.sum(axis=1)
        pick = np.minimum((U[:, 1] * n_tied).astype(int), n_tied - 1)
        arm = np.argmax(np.cumsum(tied, axis=1) == (pick + 1)[:, None], axis=1) + 1
        arm[b <= 0] = 0
        arm, y = settle(k, arm, U[:, 2])
        reward += y
        mean_reward += env.padded_means[k, arm]
        counts[rows, k] += 1
        hit = arm > 0
        r_, k_, j_ = rows[hit], k[hit], arm[hit] - 1
        n[r_, k_, j_] += 1
        means[r_, k_, j_] = ((n[r_, k_, j_] - 1) * means[r_, k_, j_] + y[hit]) / n[r_, k_, j_]

    plans = [ThresholdPlan.from_stats(env.pi, means[r], env.costs) for r in range(R)]
    width = max(p.qprev.shape[1] for p in plans)

    def stack(attr, fill, w):
        out = np.full((R, K, w), fill, dtype=getattr(plans[0], attr).dtype)
        for r, p in enumerate(plans):
            a = getattr(p, attr)
            out[r, :, :a.shape[1]] = a
        return out

    qprev, wts, arms = stack("qprev", np.inf, width), stack("w", 1.0, width), stack("arm_table", 0, width + 1)
    for t in range(eps_T, T):
        tau = T - t
        U = rng.random((R, 3))
        k = env.context_from_uniform(U[:, 0])
        rho = np.clip(b / tau, 0.0, cmax)
        vp = np.clip((rho[:, None] - qprev[rows, k]) / wts[rows, k], 0.0, 1.0)
        rank = np.count_nonzero(vp > U[:, 1:2], axis=1)
        arm = arms[rows, k, rank]
        arm[b <= 0] = 0
        arm, y = settle(k, arm, U[:, 2])
        reward += y
        mean_reward += env.padded_means[k, arm]
        counts[rows, k] += 1

    return BatchResult(reward=reward, mean_reward=mean_reward, context_counts=counts, final_budget=b,
                       budget_at={}, coerced=coerced,
                       extra={"ranking_correct": ranking_correct(means, env.means, env.costs),
                              "lam": lp_dual_price(env.pi, env.means, env.costs, budget / T),
                              "exploration_length": eps_T})


class UniformRandomPolicy(BaseEstimator):
    """Plays a uniformly random real arm whenever budget remains."""

    def fit(self, costs, pi, T=None, means=None):
        self.n_arms_ = np.shape(costs)[1]
        return self

    def act(self, context, state, u):
        if state.remaining_budget <= 0:
            return 0
        return min(int(u * self.n_arms_), self.n_arms_ - 1) + 1

    def update(self, *args):
        pass


class GreedyPolicy(BaseEstimator):
    """Plays the arm with the highest mean reward under each context, ignoring budget pacing.

    Without revealed means it uses running estimates, sampling untried arms first.
    """

    def fit(self, costs, pi, T=None, means=None):
        K, J = np.shape(costs)
        self.state_ = EstimatorState.empty(K, J)
        self.known_ = means is not None
        if self.known_:
            self.state_.emp_means[:] = means
        return self

    def act(self, context, state, u):
        if state.remaining_budget <= 0:
            return 0
        if not self.known_ and self.state_.counts[context].min() == 0:
            return explore_step(self.state_, context, u)
        return int(np.argmax(self.state_.emp_means[context])) + 1

    def update(self, context, arm, reward, t=None):
        if arm and not self.known_:
            self.state_.update(context, arm, reward)


def run_policy(env, T, budget, policy, rng=None, reveal_means=True):
    """Generic episode loop for any object with ``fit``/``act``/``update``."""
    rng = check_random_state(rng)
    policy.fit(env.costs, env.pi, T, means=env.means if reveal_means else None)
    state = env.new_state(T, budget)
    outcomes = []
    for _ in range(T):
        U = rng.random(3)
        k = int(env.context_from_uniform(U[0]))
        t = state.t
        arm = policy.act(k, state, float(U[1]))
        outcome, state = env.step(state, k, arm, float(U[2]))
        policy.update(k, outcome.action, outcome.reward, t)
        outcomes.append(outcome)
    return Trajectory.from_outcomes(outcomes)
