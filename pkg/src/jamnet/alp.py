"""Known-statistics scheduling: candidate sets, virtual arms and the threshold LP.

The per-slot relaxation is

    max  sum_k pi_k sum_j p_kj u_kj
    s.t. sum_k pi_k sum_j p_kj c_kj <= rho,  sum_j p_kj <= 1,  p >= 0,

and its optimum has a threshold form once every context's arms are pruned
to the upper concave hull of ``{(0, 0), (c_j, u_j)}`` and rewritten as
incremental ("virtual") arms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_matrix, check_probability_vector, check_random_state
from .exceptions import InvariantError


@dataclass(frozen=True)
class CandidateSet:
    """Arms kept for one context, in descending ``u / c`` order (ids are 1-based)."""

    context: int
    arms: Tuple[int, ...]
    costs: Tuple[float, ...]
    means: Tuple[float, ...]

    def __len__(self):
        return len(self.arms)


@dataclass(frozen=True)
class VirtualArm:
    context: int
    rank: int
    arm: int
    du: float
    dc: float

    @property
    def eta(self):
        return self.du / self.dc


def candidate_set(costs, means, context=0):
    """Prune one context's arms to those an optimal LP solution may use.

    Arms are sorted by ``u / c`` (ties: cheaper first, then lower id); an arm
    whose reward does not exceed that of an earlier arm is dropped; a sweep
    then keeps, from each kept arm, only the later arm with the steepest
    reward-per-cost increase (ties go to the farthest). Arms with zero
    reward are never worth more than the dummy and are dropped up front.
    """
    costs = np.asarray(costs, dtype=float)
    means = np.asarray(means, dtype=float)
    if costs.shape != means.shape or costs.ndim != 1:
        raise ValueError("costs and means must be 1-D arrays of equal length")
    if np.any(costs <= 0):
        raise ValueError("costs must be positive")
    eta = means / costs
    order = sorted(range(costs.size), key=lambda i: (-eta[i], costs[i], i))
    kept, best_u = [], 0.0
    for i in order:
        if means[i] > best_u:
            kept.append(i)
            best_u = means[i]
    hull = kept[:1]
    a = 0
    while a < len(kept) - 1:
        base = kept[a]
        best_rate, a_star = -math.inf, None
        for b in range(a + 1, len(kept)):
            dc = costs[kept[b]] - costs[base]
            if dc <= 0:
                raise InvariantError("costs must increase along the pruned list")
            rate = (means[kept[b]] - means[base]) / dc
            if rate >= best_rate:
                best_rate, a_star = rate, b
        hull.append(kept[a_star])
        a = a_star
    return CandidateSet(
        context=int(context),
        arms=tuple(int(i) + 1 for i in hull),
        costs=tuple(float(costs[i]) for i in hull),
        means=tuple(float(means[i]) for i in hull),
    )


def candidate_sets(costs, means):
    costs = check_matrix(costs, "costs", low=0.0, strict_low=True)
    means = check_matrix(means, "means", shape=costs.shape, low=0.0)
    return [candidate_set(costs[k], means[k], k) for k in range(costs.shape[0])]


def virtualize(cands):
    """Incremental (reward, cost) arms; their ``du / dc`` must not increase with rank."""
    out = []
    prev_u = prev_c = 0.0
    prev_eta = math.inf
    for rank, (arm, c, u) in enumerate(zip(cands.arms, cands.costs, cands.means), start=1):
        du, dc = u - prev_u, c - prev_c
        if du <= 0 or dc <= 0:
            raise InvariantError(f"virtual arm {rank} of context {cands.context} is not strictly increasing")
        eta = du / dc
        if eta > prev_eta * (1 + 1e-12):
            raise InvariantError(f"virtual rewards increase at rank {rank} of context {cands.context}")
        out.append(VirtualArm(cands.context, rank, arm, du, dc))
        prev_u, prev_c, prev_eta = u, c, eta
    return out


@dataclass
class LpSolution:
    """Optimal per-context arm probabilities; column 0 holds the dummy."""

    probs: np.ndarray
    vprobs: np.ndarray
    threshold_index: int
    value: float
    sorted_pairs: List[Tuple[int, int, int]]

    def to_dict(self):
        return {"threshold": int(self.threshold_index), "value": float(self.value),
                "probs": self.probs.tolist()}


class ThresholdPlan:
    """Pre-sorted virtual arms; solving for a new ``rho`` costs O(number of arms).

    Parameters
    ----------
    virtual_arms : list of VirtualArm
        Virtual arms for every context.
    pi : array of shape (K,)
    n_arms : int
        Number of real arms ``J`` (sets the width of the probability table).
    """

    def __init__(self, virtual_arms, pi, n_arms):
        pi = np.asarray(pi, dtype=float)
        K = pi.size
        self.costs = None
        self.pi, self.n_contexts, self.n_arms = pi, K, int(n_arms)
        ranked = sorted(virtual_arms, key=lambda v: (-v.eta, v.context, v.rank))
        self.sorted_pairs = [(v.context, v.arm, v.rank) for v in ranked]
        w = np.array([pi[v.context] * v.dc for v in ranked])
        self.weights = w
        self.Q = np.cumsum(w)
        qprev = np.concatenate([[0.0], self.Q[:-1]]) if w.size else np.zeros(0)
        self.width = max([v.rank for v in virtual_arms], default=0)
        shape = (K, max(self.width, 1))
        self.qprev = np.full(shape, np.inf)
        self.w = np.ones(shape)
        self.du = np.zeros(shape)
        self.arm_table = np.zeros((K, shape[1] + 1), dtype=int)
        for i, v in enumerate(ranked):
            self.qprev[v.context, v.rank - 1] = qprev[i]
            self.w[v.context, v.rank - 1] = w[i]
            self.du[v.context, v.rank - 1] = v.du
            self.arm_table[v.context, v.rank] = v.arm

    @classmethod
    def from_stats(cls, pi, means, costs):
        costs = check_matrix(costs, "costs", low=0.0, strict_low=True)
        arms = [v for cs in candidate_sets(costs, means) for v in virtualize(cs)]
        plan = cls(arms, pi, costs.shape[1])
        plan.costs = np.hstack([np.zeros((costs.shape[0], 1)), costs])
        return plan

    @property
    def total_weight(self):
        return float(self.Q[-1]) if self.Q.size else 0.0

    def vprobs(self, rho):
        """Virtual probabilities per (context, rank), non-increasing in rank."""
        return np.clip((rho - self.qprev) / self.w, 0.0, 1.0)

    def value(self, rho):
        return float(np.sum(self.pi[:, None] * self.vprobs(rho) * self.du))

    def threshold_index(self, rho):
        return int(np.searchsorted(self.Q, rho, side="right"))

    def solve(self, rho):
        if rho < 0:
            raise ValueError("rho must be non-negative")
        vp = self.vprobs(rho)
        inc = vp - np.hstack([vp[:, 1:], np.zeros((self.n_contexts, 1))])
        probs = np.zeros((self.n_contexts, self.n_arms + 1))
        for k in range(self.n_contexts):
            for r in range(self.width):
                arm = self.arm_table[k, r + 1]
                if arm:
                    probs[k, arm] = inc[k, r]
        probs[:, 0] = np.clip(1.0 - probs[:, 1:].sum(axis=1), 0.0, 1.0)
        return LpSolution(probs=probs, vprobs=vp, threshold_index=self.threshold_index(rho),
                          value=self.value(rho), sorted_pairs=list(self.sorted_pairs))

    def sample(self, k, rho, u):
        """Arm for context ``k`` drawn by inversion with the uniform ``u``."""
        rank = int(np.count_nonzero(np.clip((rho - self.qprev[k]) / self.w[k], 0.0, 1.0) > u))
        return int(self.arm_table[k, rank])

    def expected_table(self, k, rho, table, budget, tol=0.0):
        """Expected ``table[k, arm]`` under the policy, counting unaffordable arms as the dummy."""
        vp = np.clip((rho[:, None] - self.qprev[k]) / self.w[k], 0.0, 1.0)
        nxt = np.hstack([vp[:, 1:], np.zeros((vp.shape[0], 1))])
        p_rank = np.hstack([1.0 - vp[:, :1], vp - nxt])
        arms = self.arm_table[k]
        vals = np.take_along_axis(table[k], arms, axis=1)
        if self.costs is not None:
            cost = np.take_along_axis(self.costs[k], arms, axis=1)
            dead = (cost > budget[:, None] + tol) | (budget[:, None] <= 0)
            vals = np.where(dead, table[k, 0][:, None], vals)
        return np.sum(p_rank * vals, axis=1)

    def sample_many(self, k, rho, u):
        vp = np.clip((rho[:, None] - self.qprev[k]) / self.w[k], 0.0, 1.0)
        rank = np.count_nonzero(vp > u[:, None], axis=1)
        return self.arm_table[k, rank]


def solve_threshold_lp(virtual_arms, pi, rho, n_arms=None):
    if n_arms is None:
        n_arms = max([v.arm for v in virtual_arms], default=0)
    return ThresholdPlan(virtual_arms, pi, n_arms).solve(rho)


def _dual_objective(lam, pi, means, costs, rho):
    g = np.maximum(0.0, (means - lam * costs).max(axis=1))
    return lam * rho + float(pi @ g)


def _dual_breakpoints(means, costs):
    pts = {0.0}
    for k in range(means.shape[0]):
        u, c = means[k], costs[k]
        pts.update((u / c).tolist())
        for a in range(u.size):
            for b in range(u.size):
                if c[a] > c[b] and u[a] > u[b]:
                    pts.add(float((u[a] - u[b]) / (c[a] - c[b])))
    return sorted(p for p in pts if p >= 0)


def lp_bruteforce(pi, means, costs, rho, max_vars=16):
    """Exact LP optimum by enumerating the breakpoints of the Lagrangian dual.

    The dual ``min_{lam >= 0} lam * rho + sum_k pi_k max(0, max_j u_kj - lam c_kj)``
    is convex and piecewise linear, so its minimum sits at ``lam = 0`` or at
    a kink: some ``u/c`` or a ratio ``(u_a - u_b)/(c_a - c_b)``. Strong
    duality makes the minimum equal the primal value. Intended for small
    oracle instances only.
    """
    pi = check_probability_vector(pi)
    costs = check_matrix(costs, "costs", low=0.0, strict_low=True)
    means = check_matrix(means, "means", shape=costs.shape, low=0.0)
    if costs.size > max_vars:
        raise ValueError(f"instance has {costs.size} variables; the oracle is limited to {max_vars}")
    if rho < 0:
        raise ValueError("rho must be non-negative")
    return min(_dual_objective(lam, pi, means, costs, rho) for lam in _dual_breakpoints(means, costs))


def lp_dual_price(pi, means, costs, rho):
    """Smallest optimal budget multiplier of the LP relaxation."""
    pi = np.asarray(pi, dtype=float)
    means, costs = np.asarray(means, dtype=float), np.asarray(costs, dtype=float)
    best, best_val = 0.0, math.inf
    for lam in _dual_breakpoints(means, costs):
        val = _dual_objective(lam, pi, means, costs, rho)
        if val < best_val - 1e-12:
            best, best_val = lam, val
    return best


def context_surplus(means, costs, lam):
    """``g_k = max(0, max_j u_kj - lam c_kj)``, the per-context dual value."""
    return np.maximum(0.0, (np.asarray(means) - lam * np.asarray(costs)).max(axis=1))


class AlpScheduler(BaseEstimator):
    """Adaptive LP scheduler for known reward statistics.

    Parameters
    ----------
    pacing : {"remaining", "static"}
        ``remaining`` re-solves each slot at the average remaining budget
        ``b / tau`` (clamped to ``[0, c_max]``); ``static`` always uses the
        initial ``rho``.
    """

    def __init__(self, pacing="remaining"):
        self.pacing = pacing

    def fit(self, means, costs, pi):
        if self.pacing not in ("remaining", "static"):
            raise ValueError("pacing must be 'remaining' or 'static'")
        pi = check_probability_vector(pi)
        costs = check_matrix(costs, "costs", shape=(pi.size, np.shape(costs)[1]), low=0.0, strict_low=True)
        means = check_matrix(means, "means", shape=costs.shape, low=0.0, high=1.0)
        self.plan_ = ThresholdPlan.from_stats(pi, means, costs)
        self.c_max_ = float(costs.max())
        self.n_contexts_, self.n_arms_ = costs.shape
        return self

    def solve(self, rho):
        return self.plan_.solve(rho)

    def predict_proba(self, rho):
        return self.solve(rho).probs

    def value(self, rho):
        return self.plan_.value(rho)

    def effective_rho(self, state):
        if self.pacing == "static":
            return state.rho
        return min(max(state.remaining_budget / state.remaining_time, 0.0), self.c_max_)

    def act(self, context, state, u):
        if state.remaining_budget <= 0:
            return 0
        if not isinstance(u, (float, np.floating)):
            u = check_random_state(u).random()
        return self.plan_.sample(context, self.effective_rho(state), u)


def alp_policy_step(scheduler, state, context, u):
    """One ALP decision: arm for ``context`` given the budget state and a uniform (or RNG)."""
    if state.remaining_time < 1:
        raise ValueError("no remaining slots")
    return scheduler.act(context, state, u)


def run_alp(env, T, budget, rng=None, scheduler=None):
    """Simulate one ALP episode; returns the :class:`~jamnet.wpt_env.Trajectory`."""
    from .wpt_env import Trajectory

    rng = check_random_state(rng)
    if scheduler is None:
        scheduler = AlpScheduler().fit(env.means, env.costs, env.pi)
    state = env.new_state(T, budget)
    outcomes = []
    for _ in range(T):
        U = rng.random(3)
        k = int(env.context_from_uniform(U[0]))
        arm = scheduler.act(k, state, float(U[1]))
        outcome, state = env.step(state, k, arm, float(U[2]))
        outcomes.append(outcome)
    return Trajectory.from_outcomes(outcomes)


@dataclass
class BatchResult:
    """Per-replication totals of a vectorised simulation."""

    reward: np.ndarray
    mean_reward: np.ndarray
    context_counts: np.ndarray
    final_budget: np.ndarray
    budget_at: dict
    coerced: np.ndarray
    extra: dict

    def regret(self, env, T, budget, method="control"):
        """Pseudo-regret per replication.

        ``raw`` uses realised rewards, ``mean`` replaces them by their
        conditional means, ``control`` additionally subtracts the
        zero-mean context-count term ``sum_k g_k (N_k - T pi_k)`` built from
        the optimal dual price ``lam``. ``control`` equals
        ``lam * leftover + sum_t s(X_t, A_t)`` with non-negative slackness
        gaps ``s``; ``slack`` replaces each gap by its expectation over the
        action draw. All four share the same expectation.
        """
        rho = budget / T
        v = env.lp_value(rho)
        if method == "raw":
            return T * v - self.reward
        base = T * v - self.mean_reward
        if method == "mean":
            return base
        lam = self.extra.get("lam")
        if lam is None:
            lam = lp_dual_price(env.pi, env.means, env.costs, rho)
        g = context_surplus(env.means, env.costs, lam)
        control = base + (self.context_counts - T * env.pi[None, :]) @ g
        if method == "control":
            return control
        if method == "slack" and "expected_slack" in self.extra:
            return lam * self.final_budget + self.extra["expected_slack"]
        raise ValueError(f"unknown regret estimator {method!r}")


def simulate_alp_batch(env, T, budget, replications, rng=None, pacing="remaining",
                       checkpoints=(), plan=None):
    """Vectorised ALP over independent replications sharing one generator.

    With one replication the sample path equals :func:`run_alp` on a
    generator in the same state.
    """
    rng = check_random_state(rng)
    R = int(replications)
    plan = plan or ThresholdPlan.from_stats(env.pi, env.means, env.costs)
    C, cmax = env.padded_costs, env.c_max
    rows = np.arange(R)
    b = np.full(R, float(budget))
    reward, mean_reward = np.zeros(R), np.zeros(R)
    counts = np.zeros((R, env.n_contexts), dtype=np.int64)
    coerced = np.zeros(R, dtype=np.int64)
    cps = set(int(c) for c in checkpoints)
    budget_at = {}
    rho0 = budget / T
    # complementary-slackness gaps s_ka = g_k + lam c_ka - u_ka (zero on LP-optimal actions)
    lam = lp_dual_price(env.pi, env.means, env.costs, rho0)
    slack = context_surplus(env.means, env.costs, lam)[:, None] + lam * C - env.padded_means
    exp_slack = np.zeros(R)
    tol = env.budget_tol(budget)
    for t in range(T):
        tau = T - t
        if tau in cps:
            budget_at[tau] = b.copy()
        U = rng.random((R, 3))
        k = env.context_from_uniform(U[:, 0])
        rho = np.clip(b / tau, 0.0, cmax) if pacing == "remaining" else np.full(R, rho0)
        arm = plan.sample_many(k, rho, U[:, 1])
        exp_slack += plan.expected_table(k, rho, slack, b, tol)
        arm[b <= 0] = 0
        cost = C[k, arm]
        bad = cost > b + tol
        coerced += bad
        arm[bad] = 0
        cost[bad] = 0.0
        reward += env.reward_from_uniform(k, arm, U[:, 2])
        mean_reward += env.padded_means[k, arm]
        counts[rows, k] += 1
        b = np.maximum(b - cost, 0.0)
    return BatchResult(reward=reward, mean_reward=mean_reward, context_counts=counts,
                       final_budget=b, budget_at=budget_at, coerced=coerced,
                       extra={"lam": lam, "expected_slack": exp_slack})


def concentration_probe(env, T, budget, replications, deltas=(0.05, 0.1), checkpoints=(50, 100, 200),
                        rng=None):
    """Empirical ``P{|b_tau / tau - rho| > delta}`` under ALP next to the exponential bound.

    Returns rows ``{"tau", "delta", "empirical", "bound"}`` with bound
    ``exp(-K delta^2 tau)`` and ``K = rho^2 / (2 c_max^2)``.
    """
    if replications < 1000:
        raise ValueError("use at least 1000 replications")
    if max(checkpoints) > T:
        raise ValueError("checkpoints must not exceed T")
    rho = budget / T
    res = simulate_alp_batch(env, T, budget, replications, rng, checkpoints=checkpoints)
    kappa = rho ** 2 / (2 * env.c_max ** 2)
    rows = []
    for tau in sorted(checkpoints):
        dev = np.abs(res.budget_at[tau] / tau - rho)
        for d in deltas:
            rows.append({"tau": int(tau), "delta": float(d), "empirical": float(np.mean(dev > d)),
                         "bound": math.exp(-kappa * d * d * tau)})
    return rows
