from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Single feasibility / KKT tolerance shared by every solver and invariant suite.
FEAS_TOL = 1e-8


class SolverError(RuntimeError):
    pass


class Infeasible(SolverError):
    pass


class Unbounded(SolverError):
    pass


class Singular(SolverError):
    pass


class GenerationFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class DecisionVector:
    """Optimal decision ``z`` for one cost vector.

    ``status`` is ``"optimal"`` when the optimum is unique as far as the solver
    can tell, and ``"tie-broken"`` when another optimal point existed and the
    solver's deterministic rule picked this one.
    """

    z: np.ndarray
    objective: float
    status: str = "optimal"
    iterations: int = 0
