"""``jamnet`` command line: validate, wpt, place, sweep, oracle.

Exit codes: 0 success, 1 infeasible or invalid domain input, 2 I/O or parse error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .alp import ThresholdPlan, concentration_probe, lp_bruteforce, run_alp
from .exceptions import InfeasibleConfigurationError
from .geometry import ScenarioGeometry
from .harness import (ExperimentConfig, baseline_policies, generate_eavesdropper_scenario, paper_geometry,
                      paper_preset, paper_radio, run_sweep)
from .io import ConfigError, load_json, output_dir, write_manifest, write_text
from .learning import EpsilonFirstScheduler, run_policy, run_ucb_ailp
from .placement import (JamSafeDistance, adversarial_instance, fence_blocking_holds, layer_sum_bound, offline_packer,
                        read_requests, safe_distance)
from .sir import RadioParams, validate_placement
from .wpt_env import WptEnvironment, pseudo_regret

log = logging.getLogger("jamnet")

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


def _require_seed(args, cfg):
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise UsageError("no seed given: pass --seed or set \"seed\" in the config")
    return int(seed)


def _scenario(spec):
    if spec in (None, "paper"):
        return paper_geometry()
    return ScenarioGeometry.from_dict(spec)


def _radio(cfg):
    return RadioParams.from_dict(cfg["radio"]) if "radio" in cfg else paper_radio()


def cmd_validate(args):
    cfg = load_json(args.config)
    geom = _scenario(cfg.get("scenario", cfg) if "scenario" in cfg else cfg)
    radio = _radio(cfg)
    place = cfg.get("placement", {})
    min_gap, max_gap = geom.gap()
    report = {
        "min_gap": min_gap,
        "max_gap": max_gap,
        "storage_samples": int(len(geom.storage_samples())),
        "fence_samples": int(len(geom.fence_samples())),
        "allowable_grid_points": int(len(geom.grid_points())),
    }
    sigma = safe_distance(float(place.get("delta_ratio", 10.0)), float(place.get("r", 0.5)), radio)
    sigma *= float(place.get("sigma_scale", 1.0))
    report["sigma"] = sigma
    report["fence_blocking_condition"] = bool(fence_blocking_holds(min_gap, sigma))
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _build_wpt(cfg):
    env = WptEnvironment.from_dict(cfg["env"])
    T = int(cfg.get("T", 300))
    budget = float(cfg["budget"]) if "budget" in cfg else float(cfg.get("rho", 0.5)) * T
    return env, T, budget


def cmd_wpt(args):
    cfg = load_json(args.config)
    seed = _require_seed(args, cfg)
    env, T, budget = _build_wpt(cfg)
    policy = cfg.get("policy", "alp")
    rng = np.random.default_rng(seed)
    if policy == "alp":
        traj = run_alp(env, T, budget, rng)
    elif policy in ("eps-first", "cle"):
        sched = EpsilonFirstScheduler(exploration="cle" if policy == "cle" else "fixed",
                                      eps_T=cfg.get("eps_T"), delta=float(cfg.get("delta", 0.5)),
                                      delta_star=cfg.get("delta_star"))
        traj, _ = run_ucb_ailp(env, T, budget, scheduler=sched, rng=rng)
    elif policy in baseline_policies():
        traj = run_policy(env, T, budget, baseline_policies()[policy], rng=rng)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    out = output_dir(args.out)
    summary = {"policy": policy, "T": T, "budget": budget, "total_reward": traj.total_reward,
               "lp_value": env.lp_value(budget / T), "pseudo_regret": pseudo_regret(traj, env, T, budget),
               "exploration_length": traj.exploration_length}
    files = [write_text(out, "trajectory.csv", traj.to_csv()),
             write_text(out, "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")]
    write_manifest(out, "wpt", args.config, seed, files)
    log.info("wrote %d trajectory rows to %s", len(traj), out)
    return EXIT_OK


def cmd_place(args):
    cfg = load_json(args.config)
    seed = _require_seed(args, cfg)
    place = dict(cfg.get("placement", {}))
    stream = cfg.get("stream", {"kind": "random"})
    kind = stream.get("kind", "random")
    if kind == "adversarial":
        inst = adversarial_instance(float(stream.get("delta_ratio", 16.0)))
        geom, radio, requests = inst.geometry, inst.radio, inst.requests
        place.update(delta_ratio=inst.delta_ratio, r=1.0)
    else:
        geom, radio = _scenario(cfg.get("scenario")), _radio(cfg)
        if kind == "file":
            path = Path(args.config).parent / stream["path"]
            try:
                requests = read_requests(path.read_text().splitlines())
            except OSError as exc:
                raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
        elif kind == "random":
            requests = generate_eavesdropper_scenario(
                geom, int(stream.get("N_e", 6)), np.random.default_rng(seed),
                delta_ratio=float(place.get("delta_ratio", 10.0)), per_target=int(stream.get("per_target", 3)),
                max_duration=stream.get("max_duration"))
        else:
            raise ValueError(f"unknown stream kind {kind!r}")
    est = JamSafeDistance(radio=radio, delta_ratio=float(place.get("delta_ratio", 10.0)),
                          r=float(place.get("r", 0.5)), n_channels=int(place.get("n_channels", 1)),
                          power_cap=place.get("power_cap"), sigma_scale=float(place.get("sigma_scale", 1.0)))
    est.fit(geom).partial_fit(requests)
    last = requests[-1].arrival if requests else 0
    active = est.active(last)
    report = validate_placement([a.as_active() for a in active], geom, radio, geom.grid_spacing,
                                targets=[(a.request.target, a.channel) for a in active])
    out = output_dir(args.out)
    summary = {"requests": len(requests), "accepted": len(est.accepted_), "sigma": float(est.sigma_[0]),
               "receiver_valid": report.receiver_valid, "targets_valid": report.targets_valid,
               "channels": report.to_dict()}
    files = [write_text(out, "decisions.csv", est.decision_log_csv()),
             write_text(out, "validation.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")]
    write_manifest(out, "place", args.config, seed, files)
    log.info("accepted %d of %d requests", len(est.accepted_), len(requests))
    return EXIT_OK


def cmd_sweep(args):
    cfg = load_json(args.config)
    if "preset" in cfg:
        if cfg["preset"] != "paper":
            raise ValueError(f"unknown preset {cfg['preset']!r}")
        families = paper_preset(replications=int(cfg.get("replications", 20)))
        chosen = cfg.get("families", sorted(families))
        configs = {name: families[name] for name in chosen}
    else:
        configs = {"sweep": {k: v for k, v in cfg.items() if k != "seed"}}
    seed = _require_seed(args, cfg)
    out = output_dir(args.out)
    files = []
    for name, spec in configs.items():
        spec = dict(spec, seed_base=seed)
        result = run_sweep(ExperimentConfig.from_dict(spec))
        prefix = "" if name == "sweep" else f"{name}_"
        files.append(write_text(out, f"{prefix}runs.csv", result.runs_csv()))
        files.append(write_text(out, f"{prefix}summary.csv", result.summary_csv()))
        log.info("%s: %d run rows", name, len(result.runs))
    write_manifest(out, "sweep", args.config, seed, files)
    return EXIT_OK


def _random_lp_instances(n, K, J, rng):
    for _ in range(n):
        k = int(rng.integers(1, K + 1))
        j = int(rng.integers(1, J + 1))
        pi = rng.dirichlet(np.ones(k))
        means = rng.random((k, j))
        costs = rng.uniform(0.05, 1.0, size=(k, j))
        rho = float(rng.choice(np.round(np.arange(1, 10) / 10, 1)))
        yield pi, means, costs, rho


def oracle_lp(n, K, J, seed):
    """Threshold solver against the dual-enumeration oracle on random instances."""
    if K * J > 16:
        raise InfeasibleConfigurationError(f"{K}x{J} exceeds the oracle limit of 16 variables")
    rng = np.random.default_rng(seed)
    rows = []
    for pi, means, costs, rho in _random_lp_instances(n, K, J, rng):
        exact = lp_bruteforce(pi, means, costs, rho)
        fast = ThresholdPlan.from_stats(pi, means, costs).value(rho)
        rows.append({"pi": pi.tolist(), "means": means.tolist(), "costs": costs.tolist(), "rho": rho,
                     "value": exact, "threshold_value": fast})
    return {"kind": "lp", "seed": seed, "instances": rows,
            "max_abs_diff": max(abs(r["value"] - r["threshold_value"]) for r in rows)}


def cmd_oracle(args):
    cfg = load_json(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else cfg.get("seed")
    kind = args.kind
    if kind == "layer-sum":
        gammas = cfg.get("gammas", [args.gamma] if args.gamma else [2.5, 3.0, 4.0, 6.0])
        payload = {"kind": kind, "rows": [dict(gamma=g, **vars(layer_sum_bound(g))) for g in gammas]}
    else:
        if seed is None:
            raise UsageError("no seed given: pass --seed or set \"seed\" in the config")
        seed = int(seed)
        if kind == "lp":
            payload = oracle_lp(int(cfg.get("n", 1000)), int(cfg.get("K", 3)), int(cfg.get("J", 3)), seed)
        elif kind == "packer":
            geom, radio = _scenario(cfg.get("scenario")), _radio(cfg)
            n = int(cfg.get("n_requests", 10))
            if n > 20:
                raise InfeasibleConfigurationError("exhaustive packing is limited to 20 requests")
            delta_ratio = float(cfg.get("delta_ratio", 10.0))
            reqs = generate_eavesdropper_scenario(geom, max(1, math.ceil(n / 3)), np.random.default_rng(seed),
                                                  delta_ratio=delta_ratio)[:n]
            res = offline_packer(reqs, geom, radio, delta_ratio=delta_ratio, r=float(cfg.get("r", 0.5)))
            payload = {"kind": kind, "seed": seed, "requests": [q.to_dict() for q in reqs],
                       "selected": res.selected, "size": res.size, "exact": res.exact}
        elif kind == "concentration":
            env = WptEnvironment.from_dict(cfg["env"])
            T = int(cfg.get("T", 200))
            rows = concentration_probe(env, T, float(cfg.get("rho", 0.5)) * T, int(cfg.get("replications", 10000)),
                                       rng=np.random.default_rng(seed))
            payload = {"kind": kind, "seed": seed, "rows": rows}
        else:
            raise ValueError(f"unknown oracle kind {kind!r}")
    out = output_dir(args.out)
    path = write_text(out, f"oracle_{kind}.json", json.dumps(payload, indent=1, sort_keys=True) + "\n")
    write_manifest(out, f"oracle {kind}", args.config, seed, [path])
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="jamnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("config", help="JSON config file")
        p.add_argument("--out", help="output directory (default: $JAMNET_OUT or ./out)")
        p.add_argument("--seed", type=int, help="seed; overrides the config's \"seed\"")

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    for name, func, text in (("wpt", cmd_wpt, "run one WPT scheduling episode"),
                             ("place", cmd_place, "run online jammer admission on a stream"),
                             ("sweep", cmd_sweep, "run a parameter sweep")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.set_defaults(func=func)
    p = sub.add_parser("oracle", help="compute reference values and write golden JSON")
    p.add_argument("kind", choices=["lp", "packer", "layer-sum", "concentration"])
    p.add_argument("--config")
    p.add_argument("--gamma", type=float)
    common(p, config_required=False)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings():
            if args.verbose == 0:
                warnings.simplefilter("ignore")
            return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, TypeError) as exc:
        print(f"error: malformed config: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InfeasibleConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
