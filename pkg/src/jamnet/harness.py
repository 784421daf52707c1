"""Experiment orchestration: scenario generators, baselines and parameter sweeps."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_random_state
from .alp import AlpScheduler
from .exceptions import InfeasibleConfigurationError
from .geometry import ScenarioGeometry, rectangle_scenario
from .io import csv_text, fmt
from .learning import EpsilonFirstScheduler, GreedyPolicy, UniformRandomPolicy, run_ucb_ailp
from .placement import JamSafeDistance, PlacementRequest
from .sir import RadioParams, validate_placement
from .wpt_env import EnergyChannelModel, WptEnvironment, pseudo_regret

SWEEP_KEYS = ("eps", "delta", "power_cap_m", "N_e", "F", "r")
RUN_COLUMNS = ("point", "replication", "seed", "eps", "delta", "power_cap", "N_e", "F", "r",
               "requests", "accepted", "desired_jammers", "total_power", "pseudo_regret",
               "min_receiver_margin", "targets_jammed", "error")
METRICS = ("accepted", "desired_jammers", "total_power", "pseudo_regret", "min_receiver_margin")
SUMMARY_COLUMNS = ("point", "eps", "delta", "power_cap", "N_e", "F", "r", "metric", "n", "mean", "stderr", "median")


def paper_geometry(grid_spacing=1.0):
    """500 x 300 fence around a centred 400 x 200 storage."""
    return rectangle_scenario(500.0, 300.0, 400.0, 200.0, grid_spacing=grid_spacing)


def paper_radio(delta_e=1.0):
    return RadioParams(p_tx=1.0, p_rx=36.0, delta_s=1.0, delta_e=delta_e, gamma=4.0)


def energy_environment(K, J, rng, alpha=0.4, xi=1.0, attenuation=16.0, gamma=4.0,
                       distance_range=(1.0, 10.0), cost_range=(0.2, 1.0)):
    """Random WPT instance: link distances ``l`` drive uniform channel gains.

    Mean gain is ``min(1, attenuation / l**gamma) / 2`` (gain uniform on
    ``[0, min(1, attenuation / l**gamma)]``); costs are the transmit demands.
    """
    rng = check_random_state(rng)
    lo, hi = distance_range
    dist = rng.uniform(lo, hi, size=(K, J))
    demand = rng.uniform(*cost_range, size=(K, J))
    h_max = np.minimum(1.0, attenuation / dist ** gamma)
    channel = EnergyChannelModel(xi=xi, alpha=alpha, demand=demand,
                                 gain={"kind": "uniform", "params": {"h_max": h_max}})
    return WptEnvironment.from_channel(np.full(K, 1.0 / K), channel)


def candidate_pool(geom, spacing=None):
    """Allowable grid points from which jammer positions are drawn."""
    pts = geom.grid_points(spacing)
    if len(pts) == 0:
        raise InfeasibleConfigurationError("the allowable region contains no grid points")
    return pts


def generate_eavesdropper_scenario(geom, N_e, rng, delta_ratio=10.0, per_target=3, max_duration=None,
                                   pool=None):
    """Random request stream around ``N_e`` eavesdropping targets on the fence.

    Targets are drawn uniformly from fence samples. Each target gets
    ``per_target`` jammer positions among allowable grid points at distance
    ``[1, delta_ratio]``, favouring close ones (weight ``1 / d**2``). Every
    request carries a random arrival key drawn with it, so the stream for
    ``N_e`` is a sub-stream of the one for ``N_e + 1`` under the same seed.
    ``max_duration`` gives durations uniform on ``1..max_duration``.
    """
    if N_e < 1:
        raise ValueError("N_e must be at least 1")
    rng = check_random_state(rng)
    pool = candidate_pool(geom) if pool is None else pool
    fence_pts = geom.fence_samples()
    drafts = []
    for _ in range(int(N_e)):
        target = fence_pts[rng.integers(len(fence_pts))]
        d = np.hypot(*(pool - target).T)
        near = np.flatnonzero((d >= 1.0) & (d <= delta_ratio))
        if near.size == 0:
            raise InfeasibleConfigurationError(f"no allowable position within {delta_ratio} of {target.tolist()}")
        w = d[near] ** -2.0
        take = rng.choice(near, size=min(per_target, near.size), replace=False, p=w / w.sum())
        for idx in take:
            duration = None if max_duration is None else int(rng.integers(1, max_duration + 1))
            drafts.append((rng.random(), tuple(pool[idx]), tuple(target), duration))
    drafts.sort(key=lambda x: x[0])
    return [PlacementRequest(j, t, duration=dur, arrival=i) for i, (_, j, t, dur) in enumerate(drafts)]


class KnownStatsAlp(BaseEstimator):
    """Episode-loop adapter around :class:`AlpScheduler` (statistics revealed)."""

    def fit(self, costs, pi, T=None, means=None):
        if means is None:
            raise ValueError("known-statistics ALP needs the means")
        self.scheduler_ = AlpScheduler().fit(means, costs, pi)
        return self

    def act(self, context, state, u):
        return self.scheduler_.act(context, state, u)

    def update(self, *args):
        pass


def baseline_policies():
    return {"uniform-random": UniformRandomPolicy(), "greedy-best-arm": GreedyPolicy(),
            "known-stats-alp": KnownStatsAlp()}


@dataclass
class ExperimentConfig:
    """Sweep configuration (see ``from_dict`` for the JSON layout)."""

    geometry: ScenarioGeometry
    radio: RadioParams
    delta_ratio: float = 10.0
    r: float = 0.5
    F: int = 1
    eps: float = 0.1
    delta: Optional[float] = None
    power_cap_m: Optional[float] = None
    N_e: int = 6
    per_target: int = 3
    T: int = 300
    K: int = 3
    alpha: float = 0.4
    attenuation: float = 16.0
    rho: float = 0.4
    max_wpt_arms: int = 8
    replications: int = 10
    seed_base: Optional[int] = None
    sweep: Dict[str, list] = field(default_factory=dict)
    validate_spacing: Optional[float] = None

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        scen = data.pop("scenario", "paper")
        geom = paper_geometry() if scen == "paper" else ScenarioGeometry.from_dict(scen)
        radio = RadioParams.from_dict(data.pop("radio")) if "radio" in data else paper_radio()
        sweep = data.pop("sweep", {}) or {}
        unknown = set(sweep) - set(SWEEP_KEYS)
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
        if any(len(v) == 0 for v in sweep.values()):
            raise ValueError("sweep grids must be non-empty")
        known = {f for f in cls.__dataclass_fields__} - {"geometry", "radio", "sweep"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(geometry=geom, radio=radio, sweep=sweep, **data)
        if int(cfg.replications) < 1:
            raise ValueError("replications must be at least 1")
        return cfg

    def points(self):
        keys = [k for k in SWEEP_KEYS if k in self.sweep]
        for combo in itertools.product(*(self.sweep[k] for k in keys)):
            yield dict(zip(keys, combo))


def paper_preset(replications=20, seed_base=2024):
    """Sweep families at the published scale, as separate configs keyed by name."""
    base = dict(scenario="paper", delta_ratio=10.0, r=0.5, T=300, alpha=0.4, attenuation=16.0,
                replications=replications, seed_base=seed_base)
    eps = [0.1, 0.2, 0.3, 0.4, 0.5]
    return {
        "eps_delta": dict(base, sweep={"eps": eps, "delta": [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]}),
        "power_cap": dict(base, sweep={"eps": eps, "power_cap_m": [1, 2, 3, 4, 5]}),
        "eavesdroppers": dict(base, sweep={"N_e": [1, 2, 3, 4, 5, 6]}),
        "channels": dict(base, N_e=6, sweep={"F": [1, 2, 4]}),
    }


def _point_params(cfg, point):
    p = {"eps": cfg.eps, "delta": cfg.delta, "power_cap_m": cfg.power_cap_m, "N_e": cfg.N_e,
         "F": cfg.F, "r": cfg.r}
    p.update(point)
    p["power_cap"] = None if p["power_cap_m"] is None else p["power_cap_m"] / p["eps"]
    return p


def run_point(cfg, params, replication, pool=None):
    """One replication at one sweep point; returns a metrics dict."""
    seq = np.random.SeedSequence([int(cfg.seed_base), int(replication)])
    stream_seed, wpt_seed = seq.spawn(2)
    radio = cfg.radio if params["delta"] is None else replace(cfg.radio, delta_e=float(params["delta"]))
    requests = generate_eavesdropper_scenario(cfg.geometry, int(params["N_e"]), np.random.default_rng(stream_seed),
                                              delta_ratio=cfg.delta_ratio, per_target=cfg.per_target, pool=pool)
    est = JamSafeDistance(radio=radio, delta_ratio=cfg.delta_ratio, r=float(params["r"]),
                          n_channels=int(params["F"]), power_cap=params["power_cap"],
                          sigma_scale=1.0 + float(params["eps"]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est.fit(cfg.geometry)
    est.partial_fit(requests)
    accepted = est.accepted_
    report = validate_placement([a.as_active() for a in accepted], cfg.geometry, radio,
                                cfg.validate_spacing or cfg.geometry.grid_spacing,
                                targets=[(a.request.target, a.channel) for a in accepted])
    margin = min(c.min_receiver_sir for c in report.channels.values()) / radio.delta_s

    J = int(min(max(len(accepted), 1), cfg.max_wpt_arms))
    wrng = np.random.default_rng(wpt_seed)
    env = energy_environment(cfg.K, J, wrng, alpha=cfg.alpha, attenuation=cfg.attenuation, gamma=radio.gamma)
    sched = EpsilonFirstScheduler(exploration="fixed", eps_T=int(math.ceil(float(params["eps"]) * cfg.T)))
    traj, _ = run_ucb_ailp(env, cfg.T, cfg.rho * cfg.T, scheduler=sched, rng=wrng)
    return {
        "requests": len(requests),
        "accepted": len(accepted),
        "desired_jammers": len(requests) - len(accepted),
        "total_power": float(sum(a.power for a in accepted)),
        "pseudo_regret": float(pseudo_regret(traj, env, cfg.T, cfg.rho * cfg.T)),
        "min_receiver_margin": float(margin),
        "targets_jammed": bool(report.targets_valid),
    }


@dataclass
class SweepResult:
    runs: List[dict]
    summary: List[dict]

    def runs_csv(self):
        return csv_text(RUN_COLUMNS, [[fmt(r.get(c)) if r.get(c) is not None else "" for c in RUN_COLUMNS]
                                      for r in self.runs])

    def summary_csv(self):
        return csv_text(SUMMARY_COLUMNS, [[fmt(r.get(c)) if r.get(c) is not None else "" for c in SUMMARY_COLUMNS]
                                          for r in self.summary])

    def metric(self, name, by):
        """``{value of sweep key `by`: mean of metric}`` from the summary."""
        return {row[by]: row["mean"] for row in self.summary if row["metric"] == name}


def _aggregate(values):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0, math.nan, math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return int(v.size), float(v.mean()), se, float(np.median(v))


def run_sweep(config, seed_base=None):
    """Cartesian sweep; one run row per (point, replication) and mean/stderr/median summaries.

    Replication ``i`` uses the same seed at every sweep point, so points
    are compared on identical request streams and WPT instances. Failures
    at a point are recorded as rows with an ``error`` code.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    if seed_base is not None:
        cfg = replace(cfg, seed_base=int(seed_base))
    if cfg.seed_base is None:
        raise ValueError("a seed is required")
    pool = candidate_pool(cfg.geometry)
    runs, summary = [], []
    for idx, point in enumerate(cfg.points() if cfg.sweep else [{}]):
        params = _point_params(cfg, point)
        label = {k: params[k] for k in ("eps", "delta", "power_cap", "N_e", "F", "r")}
        rows = []
        for rep in range(int(cfg.replications)):
            row = {"point": idx, "replication": rep, "seed": f"{cfg.seed_base}:{rep}", **label}
            try:
                row.update(run_point(cfg, params, rep, pool))
            except InfeasibleConfigurationError as exc:
                row["error"] = f"infeasible: {exc}"
            rows.append(row)
        runs.extend(rows)
        ok = [r for r in rows if not r.get("error")]
        for m in METRICS:
            n, mean, se, med = _aggregate([r[m] for r in ok])
            summary.append({"point": idx, **label, "metric": m, "n": n, "mean": mean, "stderr": se, "median": med})
    return SweepResult(runs, summary)
