"""Optimal contracts for two agents under a Planner, compared with the Nash regime."""

from .lq_model import (LinearContract, LqParams, SolveReport, contracts_nash, contracts_pareto,
                       figure1_data, g_na, g_na_limit, g_planner, lambda_improvement_set,
                       nash_pareto_check, solve, weak_pareto_values, z_cooperative, z_nash,
                       z_pareto)

__version__ = "0.1.0"

__all__ = [
    "LinearContract", "LqParams", "SolveReport", "contracts_nash", "contracts_pareto",
    "figure1_data", "g_na", "g_na_limit", "g_planner", "lambda_improvement_set",
    "nash_pareto_check", "solve", "weak_pareto_values", "z_cooperative", "z_nash", "z_pareto",
]
