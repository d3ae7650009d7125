"""Intermediate Ricci curvature (Ric_k) of doubly warped products and surgery metrics."""

__version__ = "0.1.0"

from .construction import ConstructionParams, ConstructionResult, compute_kappa, construct, find_parameters
from .curvature import WarpedMetric, WarpState, corollary_margins, rick_positive_at, verify_metric
from .kchain import BlockOperator, av_spectrum, check_profile_hypothesis, min_chain_value_bruteforce
from .ode import solve_core_odes
from .planner import betti_total, kmin_for_dimension, plan_connected_sum
from .smoothing import smooth_junction, smooth_metric_junctions

__all__ = [
    "BlockOperator", "ConstructionParams", "ConstructionResult", "WarpState", "WarpedMetric",
    "av_spectrum", "betti_total", "check_profile_hypothesis", "compute_kappa", "construct",
    "corollary_margins", "find_parameters", "kmin_for_dimension", "min_chain_value_bruteforce",
    "plan_connected_sum", "rick_positive_at", "smooth_junction", "smooth_metric_junctions",
    "solve_core_odes", "verify_metric",
]
