"""Decentralized gradient tracking with a tunable number of local computation
and communication steps per round, plus tools to check its convergence bounds
and to study the communication/computation trade-off."""

__version__ = "0.1.0"

from .algorithm import (
    AlgoConfig,
    SwarmState,
    Trajectory,
    compact_round,
    empirical_stepsize,
    run,
    run_ensemble,
    run_round,
    stepsize_rule,
)
from .complexity import (
    ComplexityQuery,
    CostPoint,
    empirical_cost,
    iteration_complexity,
    pareto_flags,
    pareto_frontier,
    select_alpha,
    table_costs,
    table_grid,
)
from .graph import build_topology, make_operator, metropolis_weights, spectral_gap
from .problems import make_least_squares, make_nonconvex, make_ridge

__all__ = [
    "AlgoConfig",
    "SwarmState",
    "Trajectory",
    "compact_round",
    "run",
    "run_ensemble",
    "run_round",
    "stepsize_rule",
    "empirical_stepsize",
    "ComplexityQuery",
    "CostPoint",
    "iteration_complexity",
    "pareto_frontier",
    "pareto_flags",
    "table_grid",
    "empirical_cost",
    "select_alpha",
    "table_costs",
    "build_topology",
    "make_operator",
    "metropolis_weights",
    "spectral_gap",
    "make_least_squares",
    "make_nonconvex",
    "make_ridge",
]
