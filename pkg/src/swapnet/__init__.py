"""Queueing networks with mobile position-swapping servers.

Simulation of the finite continuous-time network and its mean-field
replica version, exact transit-rate combinatorics, the single-particle
solver for the limiting nonlinear dynamics, and metastability
experiments built on top of all three.
"""

__version__ = "0.1.0"

from swapnet.absorption import (
    absorption_compare,
    absorption_mc,
    absorption_times,
    circle_absorption_times,
    expected_visits,
    finite_circle_lambda,
)
from swapnet.estimators import (
    estimate_drift,
    exit_probability_estimate,
    jump_target_uniformity,
    permutation_mixing,
)
from swapnet.metastability import (
    default_divergence_threshold,
    equilibrium_comparison,
    lifetime_trend,
    metastable_lifetime,
)
from swapnet.nlmp import (
    RateProfile,
    build_chain,
    find_eta_roots,
    lambda_of_eta,
    lambda_peak,
    nu_quadratic_roots,
    rates_from_eta,
    stationary_q,
    tau_distribution,
)
from swapnet.queue_sim import fixed_point_residual
from swapnet.runner import ExperimentSpec, run_experiment, sweep
from swapnet.seeds import derive_seed
from swapnet.simulate import SimConfig, Trajectory, empty_state, level_state, simulate
from swapnet.topology import (
    GraphTopology,
    build_cycle,
    build_general,
    build_torus,
    exits_on_service,
    graph_distance,
    load_edge_list,
    next_hop_set,
    petersen,
)
from swapnet.transit import brute_force_p, closed_form_p, critical_size, monte_carlo_p

__all__ = [
    "__version__",
    "GraphTopology",
    "build_cycle",
    "build_general",
    "build_torus",
    "exits_on_service",
    "graph_distance",
    "load_edge_list",
    "next_hop_set",
    "petersen",
    "closed_form_p",
    "brute_force_p",
    "monte_carlo_p",
    "critical_size",
    "SimConfig",
    "Trajectory",
    "simulate",
    "empty_state",
    "level_state",
    "estimate_drift",
    "permutation_mixing",
    "exit_probability_estimate",
    "jump_target_uniformity",
    "absorption_times",
    "absorption_mc",
    "absorption_compare",
    "circle_absorption_times",
    "expected_visits",
    "finite_circle_lambda",
    "RateProfile",
    "tau_distribution",
    "build_chain",
    "stationary_q",
    "rates_from_eta",
    "lambda_of_eta",
    "lambda_peak",
    "find_eta_roots",
    "nu_quadratic_roots",
    "fixed_point_residual",
    "metastable_lifetime",
    "lifetime_trend",
    "equilibrium_comparison",
    "default_divergence_threshold",
    "derive_seed",
    "ExperimentSpec",
    "run_experiment",
    "sweep",
]
