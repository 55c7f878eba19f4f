"""0/1 knapsack by depth-first branch and bound.

Weights are real-valued, which rules out the usual integer DP. The bound at
each node is the greedy fractional (LP-relaxation) value of the remaining
items in decreasing value/weight order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..prob import make_rng
from .base import DecisionVector


@dataclass(frozen=True, eq=False)
class KnapsackInstance:
    weights: np.ndarray
    capacity: float

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive and finite")
        if self.capacity < 0:
            raise ValueError("capacity must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "capacity", float(self.capacity))

    @property
    def n_vars(self) -> int:
        return self.weights.shape[0]

    def decision(self, c) -> np.ndarray:
        """Minimisation convention: costs are negated item values."""
        return solve_knapsack(self, -np.asarray(c, dtype=float)).z

    def __call__(self, c) -> np.ndarray:
        return self.decision(c)


def half_capacity_knapsack(d: int, w_max: float, seed: int) -> KnapsackInstance:
    """Weights ``U[1, w_max]`` and capacity equal to half the total weight."""
    w = make_rng(seed).uniform(1.0, w_max, size=d)
    return KnapsackInstance(w, 0.5 * float(w.sum()))


def solve_knapsack(inst: KnapsackInstance, values) -> DecisionVector:
    """Exact maximiser of ``values @ z`` s.t. ``weights @ z <= capacity``, z binary.

    Items with nonpositive value are never selected. Among equal-value optima
    the first one found in the fixed search order is returned.
    """
    v = np.asarray(values, dtype=float)
    w = inst.weights
    cap = inst.capacity
    d = w.shape[0]
    cand = np.flatnonzero(v > 0)
    # Stable sort on -ratio keeps ties in index order.
    order = cand[np.argsort(-v[cand] / w[cand], kind="stable")]
    vs = v[order]
    ws = w[order]
    k = order.size

    best_val = 0.0
    best_set: list[int] = []
    chosen: list[int] = []

    def bound(i, cap_left, val):
        for j in range(i, k):
            if ws[j] <= cap_left:
                cap_left -= ws[j]
                val += vs[j]
            else:
                return val + vs[j] * cap_left / ws[j]
        return val

    def search(i, cap_left, val):
        nonlocal best_val, best_set
        if i == k:
            if val > best_val + 1e-12:
                best_val = val
                best_set = chosen.copy()
            return
        if bound(i, cap_left, val) <= best_val + 1e-12:
            return
        if ws[i] <= cap_left:
            chosen.append(i)
            search(i + 1, cap_left - ws[i], val + vs[i])
            chosen.pop()
        search(i + 1, cap_left, val)

    search(0, cap, 0.0)
    z = np.zeros(d)
    z[order[best_set]] = 1.0
    return DecisionVector(z=z, objective=float(v @ z))
