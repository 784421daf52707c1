"""Wireless-powered friendly jamming: budgeted WPT scheduling and online jammer admission."""
from .alp import AlpScheduler, ThresholdPlan, candidate_set, lp_bruteforce, run_alp, simulate_alp_batch
from .exceptions import (DegenerateDistanceError, EpisodeFinishedError, InfeasibleConfigurationError,
                         InvariantError)
from .geometry import Polygon, ScenarioGeometry, rectangle_scenario
from .harness import ExperimentConfig, generate_eavesdropper_scenario, run_sweep
from .learning import EpsilonFirstScheduler, exploration_length, run_ucb_ailp
from .placement import JamSafeDistance, PlacementRequest, offline_packer, safe_distance
from .sir import ActiveJammer, RadioParams, validate_placement
from .wpt_env import EnergyChannelModel, WptEnvironment

__version__ = "0.1.0"

__all__ = [
    "ActiveJammer", "AlpScheduler", "DegenerateDistanceError", "EnergyChannelModel", "EpisodeFinishedError",
    "EpsilonFirstScheduler", "ExperimentConfig", "InfeasibleConfigurationError", "InvariantError",
    "JamSafeDistance", "PlacementRequest", "Polygon", "RadioParams", "ScenarioGeometry", "ThresholdPlan",
    "WptEnvironment", "candidate_set", "exploration_length", "generate_eavesdropper_scenario", "lp_bruteforce",
    "offline_packer", "rectangle_scenario", "run_alp", "run_sweep", "run_ucb_ailp", "safe_distance",
    "simulate_alp_batch", "validate_placement",
]
