"""Problem instances and exact solvers: LP, QP, 0/1 knapsack, grid shortest path."""
from .base import (
    FEAS_TOL,
    DecisionVector,
    GenerationFailed,
    Infeasible,
    Singular,
    SolverError,
    Unbounded,
)
from .grid import GridFlowInstance, build_grid_lp
from .io import instance_from_dict, instance_to_dict, load_instance, save_instance
from .knapsack import KnapsackInstance, half_capacity_knapsack, solve_knapsack
from .lp import LPInstance, random_lp, solve_lp
from .qp import (
    QPInstance,
    hessian_inverse,
    kkt_residuals,
    solve_qp_constrained,
    solve_qp_unconstrained,
)

__all__ = [
    "FEAS_TOL",
    "DecisionVector",
    "GenerationFailed",
    "GridFlowInstance",
    "Infeasible",
    "KnapsackInstance",
    "LPInstance",
    "QPInstance",
    "Singular",
    "SolverError",
    "Unbounded",
    "build_grid_lp",
    "half_capacity_knapsack",
    "hessian_inverse",
    "instance_from_dict",
    "instance_to_dict",
    "kkt_residuals",
    "load_instance",
    "random_lp",
    "save_instance",
    "solve_knapsack",
    "solve_lp",
    "solve_qp_constrained",
    "solve_qp_unconstrained",
]
