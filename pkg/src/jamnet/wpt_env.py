"""Budgeted contextual-bandit environment for the wireless power transfer phase.

Contexts are energy sources (0-based), arms are jammers ``1..J`` and arm
``0`` is the dummy that neither harvests nor spends energy. All randomness
in a step comes from three uniforms (context, action, reward); the
environment consumes the first and last, policies consume the middle one.
This keeps scalar and vectorised simulators on identical sample paths.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from ._validation import check_matrix, check_positive, check_probability_vector, check_random_state
from .exceptions import EpisodeFinishedError

REWARD_KINDS = ("deterministic", "uniform", "bernoulli")
# relative slack when testing affordability; absorbs drift from repeated subtraction
BUDGET_RTOL = 1e-9
TRAJECTORY_COLUMNS = ("t", "context", "action", "reward", "cost", "remaining_budget", "coerced_flag")


def _as_matrix(value, shape, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(shape, float(arr))
    return check_matrix(arr, name, shape=shape, low=0.0)


@dataclass(frozen=True)
class EnergyChannelModel:
    """Harvested energy ``xi (1 - alpha) h c`` with a random channel gain ``h``.

    ``gain`` is ``{"kind": ..., "params": {...}}`` where the kind is one of
    ``deterministic`` (``h``), ``uniform`` (``h_max``, gain on ``[0, h_max]``)
    or ``bernoulli`` (``h_peak`` hit with probability ``p``). Gain
    parameters may be scalars or ``(K, J)`` matrices.
    """

    xi: float
    alpha: float
    demand: np.ndarray
    gain: dict

    def __post_init__(self):
        if not 0 < self.xi <= 1:
            raise ValueError("xi must lie in (0, 1]")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        demand = check_matrix(self.demand, "demand", low=0.0, strict_low=True)
        object.__setattr__(self, "demand", demand)
        if self.gain.get("kind") not in REWARD_KINDS:
            raise ValueError(f"gain kind must be one of {REWARD_KINDS}")

    @property
    def scale(self):
        return self.xi * (1.0 - self.alpha) * self.demand

    def reward_model(self):
        """Return ``(means, kind, peak)`` describing the induced reward law."""
        kind = self.gain["kind"]
        params = self.gain.get("params", {})
        shape = self.demand.shape
        if kind == "deterministic":
            return self.scale * _as_matrix(params["h"], shape, "h"), kind, None
        if kind == "uniform":
            top = self.scale * _as_matrix(params["h_max"], shape, "h_max")
            return top / 2.0, kind, None
        peak = self.scale * _as_matrix(params["h_peak"], shape, "h_peak")
        p = _as_matrix(params["p"], shape, "p")
        if np.any(p > 1):
            raise ValueError("bernoulli gain probability must be <= 1")
        return peak * p, kind, peak


@dataclass(frozen=True)
class BudgetState:
    remaining_budget: float
    remaining_time: int
    total_T: int
    total_budget: float

    @property
    def rho(self):
        return self.total_budget / self.total_T

    @property
    def average_remaining(self):
        return self.remaining_budget / self.remaining_time if self.remaining_time else 0.0

    @property
    def t(self):
        """1-based index of the next slot."""
        return self.total_T - self.remaining_time + 1


@dataclass(frozen=True)
class StepOutcome:
    t: int
    context: int
    action: int
    reward: float
    cost: float
    remaining_budget: float
    coerced: bool = False
    requested: Optional[int] = None


@dataclass
class WptEnvironment:
    """Context law ``pi``, expected rewards ``means`` and costs, both ``(K, J)``.

    ``reward_kind`` fixes the reward law around the means: ``deterministic``
    returns the mean, ``uniform`` draws on ``[0, 2u]``, ``bernoulli`` returns
    ``peak`` with probability ``u / peak`` (``peak`` defaults to 1).
    """

    pi: np.ndarray
    means: np.ndarray
    costs: np.ndarray
    reward_kind: str = "bernoulli"
    peak: Optional[np.ndarray] = None
    seed: Optional[int] = None
    channel: Optional[EnergyChannelModel] = field(default=None, repr=False)

    def __post_init__(self):
        self.pi = check_probability_vector(self.pi)
        self.costs = check_matrix(self.costs, "costs", low=0.0, strict_low=True)
        self.means = check_matrix(self.means, "means", shape=self.costs.shape, low=0.0, high=1.0)
        if self.costs.shape[0] != self.pi.size:
            raise ValueError("costs must have one row per context")
        if self.reward_kind not in REWARD_KINDS:
            raise ValueError(f"reward_kind must be one of {REWARD_KINDS}")
        if self.reward_kind == "bernoulli":
            peak = 1.0 if self.peak is None else self.peak
            self.peak = _as_matrix(peak, self.means.shape, "peak")
            if np.any(self.peak > 1) or np.any(self.means > self.peak + 1e-12):
                raise ValueError("bernoulli rewards need means <= peak <= 1")
        elif self.reward_kind == "uniform" and np.any(2 * self.means > 1 + 1e-12):
            raise ValueError("uniform rewards on [0, 2u] need u <= 0.5")
        # padded tables with the dummy arm in column 0
        K = self.pi.size
        self._u = np.hstack([np.zeros((K, 1)), self.means])
        self._c = np.hstack([np.zeros((K, 1)), self.costs])
        self._cum_pi = np.cumsum(self.pi)
        self._cum_pi[-1] = 1.0
        if self.reward_kind == "bernoulli":
            self._peak = np.hstack([np.ones((K, 1)), self.peak])
        self._plan = None

    @classmethod
    def from_channel(cls, pi, channel, seed=None):
        means, kind, peak = channel.reward_model()
        return cls(pi=pi, means=means, costs=channel.demand, reward_kind=kind, peak=peak,
                   seed=seed, channel=channel)

    @classmethod
    def from_dict(cls, data):
        gain = data.get("gain", {"kind": "bernoulli"})
        if "means" in data:
            params = gain.get("params", {}) or {}
            env = cls(pi=data["pi"], means=data["means"], costs=data["costs"],
                      reward_kind=gain.get("kind", "bernoulli"), peak=params.get("peak"),
                      seed=data.get("seed"))
        else:
            channel = EnergyChannelModel(xi=float(data.get("xi", 1.0)), alpha=float(data.get("alpha", 0.0)),
                                         demand=data["costs"], gain=gain)
            env = cls.from_channel(data["pi"], channel, seed=data.get("seed"))
        for key, value in (("K", env.n_contexts), ("J", env.n_arms)):
            if key in data and int(data[key]) != value:
                raise ValueError(f"{key}={data[key]} disagrees with the matrices ({value})")
        return env

    def to_dict(self):
        out = {"K": self.n_contexts, "J": self.n_arms, "pi": self.pi.tolist(),
               "means": self.means.tolist(), "costs": self.costs.tolist()}
        if self.channel is not None:
            out.update(xi=self.channel.xi, alpha=self.channel.alpha)
        params = {"peak": self.peak.tolist()} if self.reward_kind == "bernoulli" else {}
        out["gain"] = {"kind": self.reward_kind, "params": params}
        out["seed"] = self.seed
        return out

    @property
    def n_contexts(self):
        return self.pi.size

    @property
    def n_arms(self):
        return self.costs.shape[1]

    @property
    def c_max(self):
        return float(self.costs.max())

    @property
    def min_cost(self):
        return float(self.costs.min())

    @property
    def padded_means(self):
        return self._u

    @property
    def padded_costs(self):
        return self._c

    @staticmethod
    def budget_tol(total_budget):
        return BUDGET_RTOL * max(1.0, float(total_budget))

    def new_state(self, T, budget):
        if int(T) != T or T < 1:
            raise ValueError("T must be a positive integer")
        check_positive(float(budget), "budget", allow_zero=True)
        return BudgetState(float(budget), int(T), int(T), float(budget))

    def context_from_uniform(self, U):
        return np.searchsorted(self._cum_pi, U, side="right")

    def reward_from_uniform(self, k, j, U):
        """Vectorised reward for (context, padded arm) pairs; arm 0 yields 0."""
        u = self._u[k, j]
        if self.reward_kind == "deterministic":
            y = u * np.ones_like(np.asarray(U, dtype=float))
        elif self.reward_kind == "uniform":
            y = 2.0 * u * U
        else:
            peak = self._peak[k, j]
            y = np.where(U < u / peak, peak, 0.0)
        return np.clip(y, 0.0, 1.0)

    def sample_context(self, rng=None):
        return int(self.context_from_uniform(check_random_state(rng).random()))

    def sample_reward(self, k, j, rng=None):
        if not 1 <= j <= self.n_arms:
            raise ValueError("rewards are sampled for real arms 1..J only")
        return float(self.reward_from_uniform(k, j, check_random_state(rng).random()))

    def step(self, state, context, action, u_reward):
        """Apply ``action`` under ``context``; returns ``(StepOutcome, BudgetState)``.

        An unaffordable action is replaced by the dummy and flagged.
        """
        if state.remaining_time <= 0:
            raise EpisodeFinishedError("no slots left in this episode")
        if not 0 <= action <= self.n_arms:
            raise ValueError(f"action {action} out of range")
        coerced = False
        cost = float(self._c[context, action])
        if action and cost > state.remaining_budget + self.budget_tol(state.total_budget):
            coerced, requested, action, cost = True, action, 0, 0.0
        else:
            requested = action
        reward = float(self.reward_from_uniform(context, action, u_reward)) if action else 0.0
        budget = max(state.remaining_budget - cost, 0.0)
        new_state = replace(state, remaining_budget=budget, remaining_time=state.remaining_time - 1)
        outcome = StepOutcome(t=state.t, context=int(context), action=int(action), reward=reward,
                              cost=cost, remaining_budget=budget, coerced=coerced,
                              requested=int(requested))
        return outcome, new_state

    def lp_value(self, rho):
        if self._plan is None:
            from .alp import ThresholdPlan
            self._plan = ThresholdPlan.from_stats(self.pi, self.means, self.costs)
        return self._plan.value(rho)


def sample_context(env, rng=None):
    return env.sample_context(rng)


def sample_reward(env, k, j, rng=None):
    return env.sample_reward(k, j, rng)


def step(env, state, context, action, u_reward):
    return env.step(state, context, action, u_reward)


@dataclass
class Trajectory:
    """Column store of step outcomes."""

    context: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    cost: np.ndarray
    remaining_budget: np.ndarray
    coerced: np.ndarray
    exploration_length: Optional[int] = None

    @classmethod
    def from_outcomes(cls, outcomes: List[StepOutcome], **extra):
        return cls(
            context=np.array([o.context for o in outcomes], dtype=int),
            action=np.array([o.action for o in outcomes], dtype=int),
            reward=np.array([o.reward for o in outcomes], dtype=float),
            cost=np.array([o.cost for o in outcomes], dtype=float),
            remaining_budget=np.array([o.remaining_budget for o in outcomes], dtype=float),
            coerced=np.array([o.coerced for o in outcomes], dtype=bool),
            **extra,
        )

    def __len__(self):
        return self.action.size

    @property
    def total_reward(self):
        return float(self.reward.sum())

    def rows(self):
        for i in range(len(self)):
            yield (i + 1, int(self.context[i]), int(self.action[i]), repr(float(self.reward[i])),
                   repr(float(self.cost[i])), repr(float(self.remaining_budget[i])), int(self.coerced[i]))

    def to_csv(self, fh=None):
        """Write the trajectory CSV; returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        writer.writerows(self.rows())
        return buf.getvalue() if fh is None else None


def pseudo_regret(trajectory, env, T, budget):
    """``T * v(rho) - sum of rewards``; negative on lucky sample paths."""
    return T * env.lp_value(budget / T) - float(np.sum(trajectory.reward))


def expected_reward_regret(trajectory, env, T, budget):
    """Same expectation as :func:`pseudo_regret`, with realised rewards replaced by their means."""
    u = env.padded_means[trajectory.context, trajectory.action]
    return T * env.lp_value(budget / T) - float(u.sum())
