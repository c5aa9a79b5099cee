"""
LNC Planner - Core Modules Package

This package contains the link-activation scheduling modules:
- ltl: formulas, parsing, lasso semantics, Büchi translation, specification builders
- network: geometric sensor networks, command layers, k-means placement, file I/O
- ts: transition systems, transition costs, prefix-suffix schedules
- planner: product automaton and optimal lasso search, specialized planner
- hlnc: hierarchical planning (command activations, local plans, stitching, audit)
- consensus: Laplacian consensus over switching graphs and diagnostics
- oracle: brute-force ground truth for tiny instances
- schemas: pydantic run configuration and file formats
"""

from .errors import (LncError, ConfigError, LtlSyntaxError, UndeclaredPropositionError, TranslationBudgetError,
                     NetworkError, CoverageError, BudgetExceededError, InfeasibleError, PlanningError,
                     HorizonError, ConsensusError, OracleBoundError)
from .ltl import (parse, to_string, to_nnf, eval_lasso, translate_to_nba, translate_to_gba, build_phi, build_phi_ij,
                  build_psi)
from .network import (LinkId, SensorNetwork, build_geometric_graph, random_geometric_network, link_neighborhood,
                      kmeans_place, coverage_check, build_command_layer)
from .ts import Schedule, CostFn, ProductTs, build_link_ts, build_product_ts, jaccard_cost, cost_to_go, plan_cost
from .planner import PlannerOptions, build_pba, find_optimal_lasso, plan_centralized, plan_specialized_lnc
from .hlnc import plan_command_activations, plan_local, stitch, plan_hlnc, audit_feasibility
from .consensus import step, run, check_joint_connectivity, liveness_check, efficiency
from .oracle import brute_force_optimal, verify_translation

__all__ = [
    'LncError', 'ConfigError', 'LtlSyntaxError', 'UndeclaredPropositionError', 'TranslationBudgetError',
    'NetworkError', 'CoverageError', 'BudgetExceededError', 'InfeasibleError', 'PlanningError',
    'HorizonError', 'ConsensusError', 'OracleBoundError',
    'parse', 'to_string', 'to_nnf', 'eval_lasso', 'translate_to_nba', 'translate_to_gba', 'build_phi', 'build_phi_ij',
    'build_psi',
    'LinkId', 'SensorNetwork', 'build_geometric_graph', 'random_geometric_network', 'link_neighborhood',
    'kmeans_place', 'coverage_check', 'build_command_layer',
    'Schedule', 'CostFn', 'ProductTs', 'build_link_ts', 'build_product_ts', 'jaccard_cost', 'cost_to_go',
    'plan_cost',
    'PlannerOptions', 'build_pba', 'find_optimal_lasso', 'plan_centralized', 'plan_specialized_lnc',
    'plan_command_activations', 'plan_local', 'stitch', 'plan_hlnc', 'audit_feasibility',
    'step', 'run', 'check_joint_connectivity', 'liveness_check', 'efficiency',
    'brute_force_optimal', 'verify_translation',
]

__version__ = '1.0.0'
