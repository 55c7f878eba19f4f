"""Linear programs ``min c^T z  s.t.  A z <= b, A_eq z = b_eq, z >= 0``.

The solver is a dense revised simplex method with an explicit basis inverse
(rank-one eta updates, periodic refactorisation) and Bland's smallest-index
rule for both the entering and the leaving variable. Bland's rule never
cycles and makes tie-breaking a pure function of the cost vector.

Phase 1 depends only on the feasible region, so it runs once per instance;
every solve starts phase 2 from the cached feasible basis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..prob import make_rng
from .base import FEAS_TOL, DecisionVector, GenerationFailed, Infeasible, SolverError, Unbounded

RC_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 50


@dataclass
class _StandardForm:
    A: np.ndarray          # rows x columns, rhs made nonnegative
    b: np.ndarray
    n_struct: int          # number of structural (z or z+/z-) columns
    basis: list[int]       # cached phase-1 feasible basis
    B_inv: np.ndarray
    x_B: np.ndarray


class _Simplex:
    """Revised simplex iterations on a fixed constraint matrix."""

    def __init__(self, A, b, basis, B_inv=None, eligible=None):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.m, self.N = A.shape
        self.eligible = np.ones(self.N, dtype=bool) if eligible is None else eligible
        if B_inv is None:
            self.refactor()
        else:
            self.B_inv = B_inv.copy()
            self.x_B = self.B_inv @ b
        self.iterations = 0

    def refactor(self):
        self.B_inv = np.linalg.inv(self.A[:, self.basis])
        self.x_B = self.B_inv @ self.b

    def pivot(self, j, r, d):
        piv = d[r]
        self.B_inv[r] /= piv
        others = np.arange(self.m) != r
        self.B_inv[others] -= np.outer(d[others], self.B_inv[r])
        theta = self.x_B[r] / piv
        self.x_B[others] -= theta * d[others]
        self.x_B[r] = theta
        self.basis[r] = j
        self.iterations += 1
        if self.iterations % REFACTOR_EVERY == 0:
            self.refactor()

    def reduced_costs(self, c):
        y = c[self.basis] @ self.B_inv
        return c - y @ self.A

    def run(self, c, max_iter=None):
        """Iterate to optimality for cost ``c``; returns final reduced costs."""
        max_iter = max_iter or 50 * (self.m + self.N)
        basic = np.zeros(self.N, dtype=bool)
        for _ in range(max_iter):
            rc = self.reduced_costs(c)
            basic[:] = False
            basic[self.basis] = True
            candidates = np.flatnonzero((rc < -RC_TOL) & self.eligible & ~basic)
            if candidates.size == 0:
                return rc
            j = int(candidates[0])
            d = self.B_inv @ self.A[:, j]
            pos = d > PIVOT_TOL
            if not pos.any():
                raise Unbounded("objective is unbounded below")
            ratios = np.full(self.m, np.inf)
            ratios[pos] = np.maximum(self.x_B[pos], 0.0) / d[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * (1.0 + best))
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(j, r, d)
        raise SolverError("simplex iteration limit reached")


def _standard_form(A, b, A_eq, b_eq, nonneg):
    """Build ``[structural | slack]`` columns with nonnegative rhs and a phase-1 basis."""
    n = A.shape[1] if A.size else (A_eq.shape[1] if A_eq is not None else 0)
    m_ub = A.shape[0]
    m_eq = 0 if A_eq is None else A_eq.shape[0]
    struct_ub = A if nonneg else np.hstack([A, -A])
    n_struct = struct_ub.shape[1]
    rows = []
    rhs = []
    for i in range(m_ub):
        slack = np.zeros(m_ub)
        slack[i] = 1.0
        rows.append(np.concatenate([struct_ub[i], slack]))
        rhs.append(b[i])
    for i in range(m_eq):
        s = A_eq[i] if nonneg else np.concatenate([A_eq[i], -A_eq[i]])
        rows.append(np.concatenate([s, np.zeros(m_ub)]))
        rhs.append(b_eq[i])
    M = np.array(rows, dtype=float).reshape(m_ub + m_eq, n_struct + m_ub)
    rhs = np.array(rhs, dtype=float)
    flip = rhs < 0
    M[flip] *= -1
    rhs[flip] *= -1

    # Slack columns serve as the initial basis where they carry +1; other rows get artificials.
    basis = []
    art_rows = []
    for i in range(M.shape[0]):
        if i < m_ub and not flip[i]:
            basis.append(n_struct + i)
        else:
            art_rows.append(i)
            basis.append(-1)
    n_real = M.shape[1]
    if art_rows:
        art = np.zeros((M.shape[0], len(art_rows)))
        for k, i in enumerate(art_rows):
            art[i, k] = 1.0
            basis[i] = n_real + k
        M1 = np.hstack([M, art])
        cost1 = np.concatenate([np.zeros(n_real), np.ones(len(art_rows))])
        sx = _Simplex(M1, rhs, basis)
        sx.run(cost1)
        infeas = cost1[sx.basis] @ sx.x_B
        if infeas > FEAS_TOL * (1.0 + np.abs(rhs).max(initial=0.0)):
            raise Infeasible(f"phase 1 ended with infeasibility {infeas:.3e}")
        # Drive remaining (zero-level) artificials out; drop rows that are redundant.
        keep = np.ones(M.shape[0], dtype=bool)
        for r in range(M.shape[0]):
            if sx.basis[r] < n_real:
                continue
            row = sx.B_inv[r] @ M
            cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            cand = [j for j in cand if j not in sx.basis]
            if cand:
                j = int(cand[0])
                sx.pivot(j, r, sx.B_inv @ M1[:, j])
            else:
                keep[r] = False
        basis = [bj for r, bj in enumerate(sx.basis) if keep[r]]
        M = M[keep]
        rhs = rhs[keep]
    B_inv = np.linalg.inv(M[:, basis])
    x_B = B_inv @ rhs
    return _StandardForm(M, rhs, n_struct, basis, B_inv, x_B)


@dataclass(frozen=True, eq=False)
class LPInstance:
    """Polyhedron ``{z : A z <= b, A_eq z = b_eq, z >= 0 if nonneg}``.

    Construction validates that the region is nonempty and bounded.
    """

    A: np.ndarray
    b: np.ndarray
    nonneg: bool = True
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    validate: bool = field(default=True, repr=False)
    _std: _StandardForm = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.A_eq is not None:
            A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            b_eq = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
            if A.size == 0:
                A = np.zeros((0, A_eq.shape[1]))
                b = np.zeros(0)
            if A_eq.shape[0] != b_eq.shape[0] or A_eq.shape[1] != A.shape[1]:
                raise ValueError("A_eq / b_eq shape mismatch")
            object.__setattr__(self, "A_eq", A_eq)
            object.__setattr__(self, "b_eq", b_eq)
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b have incompatible shapes")
        if not np.all(np.isfinite(b)) or not np.all(np.isfinite(A)):
            raise ValueError("A and b must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_std", _standard_form(A, b, self.A_eq, self.b_eq, self.nonneg))
        if self.validate:
            self._check_bounded()

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    def _check_bounded(self):
        n = self.n_vars
        if self.nonneg:
            solve_lp(self, -np.ones(n))
        else:
            for i in range(n):
                e = np.zeros(n)
                e[i] = 1.0
                solve_lp(self, e)
                solve_lp(self, -e)

    def is_feasible(self, z, tol: float = FEAS_TOL) -> bool:
        z = np.asarray(z, dtype=float)
        ok = np.all(self.A @ z <= self.b + tol) if self.A.size else True
        if self.A_eq is not None:
            ok = ok and np.all(np.abs(self.A_eq @ z - self.b_eq) <= tol)
        if self.nonneg:
            ok = ok and np.all(z >= -tol)
        return bool(ok)

    def decision(self, c) -> np.ndarray:
        return solve_lp(self, c).z

    def __call__(self, c) -> np.ndarray:
        return self.decision(c)


def solve_lp(inst: LPInstance, c) -> DecisionVector:
    """Optimal vertex of ``inst`` for cost ``c`` (Bland's rule breaks ties)."""
    c = np.asarray(c, dtype=float).ravel()
    if c.shape[0] != inst.n_vars:
        raise ValueError(f"cost has length {c.shape[0]}, expected {inst.n_vars}")
    std = inst._std
    c_struct = c if inst.nonneg else np.concatenate([c, -c])
    c_full = np.concatenate([c_struct, np.zeros(std.A.shape[1] - std.n_struct)])
    sx = _Simplex(std.A, std.b, std.basis, std.B_inv)
    rc = sx.run(c_full)
    x = np.zeros(std.A.shape[1])
    x[sx.basis] = sx.x_B
    x[np.abs(x) < 1e-12] = 0.0
    xs = x[:std.n_struct]
    z = xs if inst.nonneg else xs[: inst.n_vars] - xs[inst.n_vars:]
    nonbasic = np.ones(std.A.shape[1], dtype=bool)
    nonbasic[sx.basis] = False
    tie = bool(np.any(np.abs(rc[nonbasic]) <= RC_TOL))
    return DecisionVector(z=z, objective=float(c @ z), status="tie-broken" if tie else "optimal",
                          iterations=sx.iterations)


def random_lp(n: int, d: int, seed: int, max_tries: int = 100) -> LPInstance:
    """Random bounded LP with ``A ~ N(0, 1)`` and ``b ~ |N(0, 1)| + 1``.

    Unbounded draws are rejected and redrawn from the same stream.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    rng = make_rng(seed)
    for _ in range(max_tries):
        A = rng.standard_normal((d, n))
        b = np.abs(rng.standard_normal(d)) + 1.0
        try:
            return LPInstance(A, b)
        except Unbounded:
            continue
    raise GenerationFailed(f"no bounded LP after {max_tries} draws (n={n}, d={d})")
