"""Quadratic programs ``min c^T z + 1/2 z^T (Q + lam I) z`` over an optional polyhedron.

The effective Hessian is ``H = Q + lam I`` so that the unconstrained optimum
is ``-(Q + lam I)^{-1} c``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import FEAS_TOL, DecisionVector, Infeasible, Singular, SolverError
from .lp import LPInstance, solve_lp


@dataclass(frozen=True, eq=False)
class QPInstance:
    Q: np.ndarray
    lam: float = 1.0
    constraints: LPInstance | None = None
    H: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12 * max(1.0, np.abs(Q).max()):
            raise ValueError("Q must be symmetric")
        if Q.size and np.linalg.eigvalsh(Q).min() < -1e-10 * max(1.0, np.abs(Q).max()):
            raise ValueError("Q must be positive semidefinite")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.constraints is not None and self.constraints.n_vars != Q.shape[0]:
            raise ValueError("constraint dimension does not match Q")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "H", Q + self.lam * np.eye(Q.shape[0]))

    @property
    def n_vars(self) -> int:
        return self.Q.shape[0]

    def objective(self, c, z) -> float:
        return float(c @ z + 0.5 * z @ self.H @ z)

    def batch_decision(self, C) -> np.ndarray:
        """Decisions for every row of ``C``; closed form when unconstrained."""
        C = np.atleast_2d(np.asarray(C, dtype=float))
        if self.constraints is None:
            return -C @ hessian_inverse(self)
        return np.array([solve_qp_constrained(self, c).z for c in C])

    def decision(self, c) -> np.ndarray:
        if self.constraints is None:
            return solve_qp_unconstrained(self, c).z
        return solve_qp_constrained(self, c).z

    def __call__(self, c) -> np.ndarray:
        return self.decision(c)


def hessian_inverse(inst: QPInstance) -> np.ndarray:
    """``(Q + lam I)^{-1}``; raises :class:`Singular` when the Hessian is not PD."""
    try:
        L = np.linalg.cholesky(inst.H)
    except np.linalg.LinAlgError as exc:
        raise Singular("Q + lam I is not positive definite") from exc
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def solve_qp_unconstrained(inst: QPInstance, c) -> DecisionVector:
    c = np.asarray(c, dtype=float)
    try:
        L = np.linalg.cholesky(inst.H)
    except np.linalg.LinAlgError as exc:
        raise Singular("Q + lam I is not positive definite") from exc
    y = np.linalg.solve(L, -c)
    z = np.linalg.solve(L.T, y)
    return DecisionVector(z=z, objective=inst.objective(c, z))


def _inequalities(poly: LPInstance):
    """Stack ``A z <= b`` and ``-z <= 0`` into one ``G z <= h`` system."""
    G, h = poly.A, poly.b
    if poly.nonneg:
        n = poly.n_vars
        G = np.vstack([G, -np.eye(n)])
        h = np.concatenate([h, np.zeros(n)])
    return G, h


def _box_bounds(G, h):
    """Per-variable bounds when every row of ``G`` touches a single variable, else None."""
    n = G.shape[1]
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for g, hv in zip(G, h):
        nz = np.flatnonzero(g)
        if nz.size != 1:
            return None
        j = nz[0]
        if g[j] > 0:
            hi[j] = min(hi[j], hv / g[j])
        else:
            lo[j] = max(lo[j], hv / g[j])
    return lo, hi


def _independent(rows: np.ndarray, cand: np.ndarray) -> bool:
    if rows.shape[0] == 0:
        return bool(np.linalg.norm(cand) > 0)
    M = np.vstack([rows, cand])
    return np.linalg.matrix_rank(M, tol=1e-10) == M.shape[0]


def solve_qp_constrained(inst: QPInstance, c, max_iter: int = 500) -> DecisionVector:
    """Primal active-set method.

    Warm start is the unconstrained optimum clipped into the box when the
    polyhedron is a box, otherwise a vertex of the polyhedron. Constraints
    leave the working set by most negative multiplier and enter by smallest
    index among blocking constraints.
    """
    if inst.constraints is None:
        return solve_qp_unconstrained(inst, c)
    c = np.asarray(c, dtype=float)
    poly = inst.constraints
    H = inst.H
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise Singular("Q + lam I is not positive definite") from exc
    G, h = _inequalities(poly)
    E = poly.A_eq if poly.A_eq is not None else np.zeros((0, inst.n_vars))
    n = inst.n_vars

    z = np.linalg.solve(H, -c)
    if not poly.is_feasible(z):
        box = _box_bounds(G, h) if E.shape[0] == 0 else None
        if box is not None:
            z = np.clip(z, *box)
        else:
            z = solve_lp(poly, np.zeros(n)).z
    if not poly.is_feasible(z):
        raise Infeasible("no feasible starting point")

    work: list[int] = []
    base_rows = E.copy()
    for i in np.flatnonzero(np.abs(G @ z - h) <= FEAS_TOL):
        if _independent(np.vstack([base_rows, G[work]]) if work else base_rows, G[i]):
            work.append(int(i))

    for it in range(max_iter):
        W = np.vstack([E, G[work]]) if work else E
        k = W.shape[0]
        g = H @ z + c
        K = np.zeros((n + k, n + k))
        K[:n, :n] = H
        K[:n, n:] = W.T
        K[n:, :n] = W
        sol = np.linalg.solve(K, np.concatenate([-g, np.zeros(k)]))
        p, mult = sol[:n], sol[n:]
        if np.linalg.norm(p, np.inf) <= 1e-12 * (1.0 + np.linalg.norm(z, np.inf)):
            ineq = mult[E.shape[0]:]
            if ineq.size == 0 or ineq.min() >= -1e-10:
                z = z + 0.0
                return DecisionVector(z=z, objective=inst.objective(c, z), iterations=it)
            drop = int(np.argmin(ineq))
            work.pop(drop)
            continue
        Gp = G @ p
        slack = h - G @ z
        alpha = 1.0
        block = None
        in_work = np.zeros(G.shape[0], dtype=bool)
        in_work[work] = True
        for i in np.flatnonzero((Gp > 1e-12) & ~in_work):
            step = max(slack[i], 0.0) / Gp[i]
            if step < alpha - 1e-14:
                alpha, block = step, int(i)
        z = z + alpha * p
        if block is not None:
            work.append(block)
    raise SolverError("active-set iteration limit reached")


def kkt_residuals(inst: QPInstance, c, z) -> dict:
    """Stationarity, primal, dual and complementarity residuals at ``z``.

    Multipliers are recovered by nonnegative least squares on the active rows.
    """
    from scipy.optimize import nnls

    c = np.asarray(c, dtype=float)
    z = np.asarray(z, dtype=float)
    g = inst.H @ z + c
    if inst.constraints is None:
        return {"stationarity": float(np.abs(g).max()), "primal": 0.0, "dual": 0.0, "complementarity": 0.0}
    G, h = _inequalities(inst.constraints)
    slack = h - G @ z
    active = np.flatnonzero(slack <= 1e-7)
    cols = [G[active].T]
    poly = inst.constraints
    if poly.A_eq is not None:
        cols += [poly.A_eq.T, -poly.A_eq.T]
    M = np.hstack(cols) if cols else np.zeros((inst.n_vars, 0))
    mult, res = nnls(M, -g) if M.shape[1] else (np.zeros(0), float(np.linalg.norm(g)))
    lam_act = mult[: active.size]
    primal = float(max(np.max(-slack, initial=0.0),
                       np.abs(poly.A_eq @ z - poly.b_eq).max(initial=0.0) if poly.A_eq is not None else 0.0))
    return {
        "stationarity": float(res),
        "primal": primal,
        "dual": float(max(-lam_act.min(initial=0.0), 0.0)),
        "complementarity": float(np.abs(lam_act * slack[active]).max(initial=0.0)),
    }
