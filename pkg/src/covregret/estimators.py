"""Regret estimators.

A *solver* anywhere in this module is any callable mapping a cost vector to
the optimal decision ``pi*(c)`` (every instance class in
:mod:`covregret.problems` is such a callable). Regret follows the
minimisation sign convention: ``E[c^T pi*(c)] - E[c^T pi*(mean)] <= 0``.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .parallel import ordered_map
from .prob import make_rng

Solver = Callable[[np.ndarray], np.ndarray]


class InsufficientSamples(ValueError):
    pass


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class SamplePairs:
    """Archive of ``(c_i, pi*(c_i))`` rows.

    ``mean`` is the known cost mean, or ``None`` when the mean is estimated
    from the archive itself.
    """

    costs: np.ndarray
    decisions: np.ndarray
    mean: np.ndarray | None = None

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.costs, dtype=float))
        Z = np.atleast_2d(np.asarray(self.decisions, dtype=float))
        if C.shape[0] != Z.shape[0]:
            raise ValueError("costs and decisions need the same number of rows")
        if C.shape[0] < 1:
            raise ValueError("need at least one pair")
        object.__setattr__(self, "costs", C)
        object.__setattr__(self, "decisions", Z)
        if self.mean is not None:
            object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))

    @property
    def n(self) -> int:
        return self.costs.shape[0]

    @property
    def mean_mode(self) -> str:
        return "estimated" if self.mean is None else "known"

    def __len__(self):
        return self.n

    def __iter__(self):
        return zip(self.costs, self.decisions)


@dataclass
class RegretEstimate:
    value: float
    method: str
    n: int
    variance: float | None = None
    stderr: float | None = None
    ci: tuple[float, float] | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {"value": self.value, "method": self.method, "n": self.n}
        if self.stderr is not None:
            doc["stderr"] = self.stderr
        if self.ci is not None:
            doc["ci"] = list(self.ci)
        doc.update(self.extras)
        return doc


def decide_rows(solver: Solver, C: np.ndarray) -> np.ndarray:
    """Apply ``solver`` to every row of ``C`` (vectorised when the solver allows it)."""
    C = np.atleast_2d(C)
    batch = getattr(solver, "batch_decision", None)
    if batch is not None:
        return batch(C)
    return np.array(ordered_map(solver, C))


class CovarianceAccumulator:
    """Streaming sums for the one-pass sample covariance ``(1/n) sum (c-cbar)^T (z-zbar)``."""

    def __init__(self):
        self.n = 0
        self.s_cz = 0.0
        self.s_c = None
        self.s_z = None

    def update(self, C, Z):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if self.s_c is None:
            self.s_c = np.zeros(C.shape[1])
            self.s_z = np.zeros(Z.shape[1])
        self.n += C.shape[0]
        self.s_cz += float(np.einsum("ij,ij->", C, Z))
        self.s_c += C.sum(axis=0)
        self.s_z += Z.sum(axis=0)

    def value(self, unbiased: bool = False) -> float:
        if self.n <= 1:
            return 0.0
        cross = self.s_cz - self.s_c @ self.s_z / self.n
        return float(cross / (self.n - 1 if unbiased else self.n))


def cov_regret(pairs: SamplePairs | Iterable, unbiased: bool = False, chunk: int = 4096) -> RegretEstimate:
    """One-pass sample covariance between costs and decisions.

    ``pairs`` may be a :class:`SamplePairs` or any iterable of ``(c, z)`` rows;
    either way the archive is traversed exactly once. Centring only one side
    is enough for the cross term, so a known mean gives the same value.
    """
    acc = CovarianceAccumulator()
    if isinstance(pairs, SamplePairs):
        for start in range(0, pairs.n, chunk):
            acc.update(pairs.costs[start:start + chunk], pairs.decisions[start:start + chunk])
    else:
        buf_c, buf_z = [], []
        for c, z in pairs:
            buf_c.append(c)
            buf_z.append(z)
            if len(buf_c) == chunk:
                acc.update(buf_c, buf_z)
                buf_c, buf_z = [], []
        if buf_c:
            acc.update(buf_c, buf_z)
    if acc.n == 0:
        raise InsufficientSamples("empty archive")
    return RegretEstimate(acc.value(unbiased), "cov", acc.n)


def empirical_regret(samples, solver: Solver, mean=None, decisions=None) -> RegretEstimate:
    """``(1/n) sum c_i^T pi*(c_i) - (1/n) sum c_i^T pi*(m)``.

    ``m`` is the known ``mean`` when given, else the sample mean. Precomputed
    per-sample ``decisions`` skip the n solves.
    """
    C = np.atleast_2d(np.asarray(samples, dtype=float))
    n = C.shape[0]
    t0 = time.perf_counter()
    Z = decide_rows(solver, C) if decisions is None else np.asarray(decisions, dtype=float)
    m = C.mean(axis=0) if mean is None else np.asarray(mean, dtype=float)
    z_bar = np.asarray(solver(m), dtype=float)
    hindsight = np.einsum("ij,ij->i", C, Z)
    value = float(hindsight.mean() - C.mean(axis=0) @ z_bar)
    solves = (n if decisions is None else 0) + 1
    return RegretEstimate(value, "empirical", n, extras={
        "mean_mode": "estimated" if mean is None else "known",
        "solve_count": solves,
        "wall_clock_s": time.perf_counter() - t0,
    })


def saa_regret(samples, solver: Solver, scenario_count: int, seed: int, replace: bool = False,
               decisions=None) -> RegretEstimate:
    """Sample average approximation over ``scenario_count`` scenarios drawn from ``samples``.

    Without replacement by default; ``scenario_count == n`` then uses the whole
    archive in its original order. Performs ``scenario_count + 1`` solves
    unless cached ``decisions`` are supplied.
    """
    C = np.atleast_2d(np.asarray(samples, dtype=float))
    n = C.shape[0]
    B = int(scenario_count)
    if B < 1:
        raise ValueError("scenario_count must be >= 1")
    if not replace and B > n:
        raise ValueError("scenario_count exceeds archive size; pass replace=True")
    t0 = time.perf_counter()
    if B == n and not replace:
        idx = np.arange(n)
    else:
        idx = make_rng(seed).choice(n, size=B, replace=replace)
    Cb = C[idx]
    if decisions is None:
        Zb = decide_rows(solver, Cb)
        solves = B + 1
    else:
        Zb = np.asarray(decisions, dtype=float)[idx]
        solves = 1
    z_bar = np.asarray(solver(Cb.mean(axis=0)), dtype=float)
    value = float(np.einsum("ij,ij->i", Cb, Zb).mean() - Cb.mean(axis=0) @ z_bar)
    return RegretEstimate(value, "saa", B, extras={
        "solve_count": solves,
        "wall_clock_s": time.perf_counter() - t0,
    })


def qp_analytic_cov(Q, lam: float, Sigma) -> float:
    """``-tr((Q + lam I)^{-1} Sigma)``: covariance regret of the unconstrained QP, no solves."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    H = Q + lam * np.eye(Q.shape[0])
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        from .problems import Singular

        raise Singular("Q + lam I is not positive definite") from exc
    X = np.linalg.solve(L, Sigma)
    return float(-np.trace(np.linalg.solve(L.T, X)))


def residual_estimator(pairs: SamplePairs, solver: Solver) -> float:
    """``cbar^T (mean_i pi*(c_i) - pi*(cbar))``; exactly one extra solve."""
    if pairs.n < 2:
        raise InsufficientSamples("residual estimator needs n >= 2")
    c_bar = pairs.costs.mean(axis=0)
    z_bar = pairs.decisions.mean(axis=0)
    return float(c_bar @ (z_bar - np.asarray(solver(c_bar), dtype=float)))


def corrected_regret(pairs: SamplePairs, solver: Solver) -> RegretEstimate:
    """Covariance estimate plus the residual estimate."""
    if pairs.n < 2:
        raise InsufficientSamples("corrected estimate needs n >= 2")
    cov = cov_regret(pairs).value
    res = residual_estimator(pairs, solver)
    return RegretEstimate(cov + res, "corrected", pairs.n, extras={"cov": cov, "residual": res})


def write_pairs_csv(pairs: SamplePairs, path) -> None:
    d_c = pairs.costs.shape[1]
    d_z = pairs.decisions.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"c_{i}" for i in range(d_c)] + [f"z_{i}" for i in range(d_z)])
        for c, z in pairs:
            w.writerow([repr(float(x)) for x in c] + [repr(float(x)) for x in z])


def read_pairs_csv(path, mean=None) -> SamplePairs:
    """Read a pairs archive with header ``c_0..c_{d-1}, z_0..z_{d-1}``."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("empty file")
    header = [h.strip() for h in rows[0]]
    c_cols = [h for h in header if h.startswith("c_")]
    z_cols = [h for h in header if h.startswith("z_")]
    d = len(c_cols)
    if (d == 0 or len(z_cols) != d or len(header) != 2 * d
            or c_cols != [f"c_{i}" for i in range(d)] or z_cols != [f"z_{i}" for i in range(d)]):
        raise SchemaError(f"expected header c_0..c_{{d-1}}, z_0..z_{{d-1}}; got {header}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != 2 * d:
        raise SchemaError("ragged or empty data rows")
    c_idx = [header.index(f"c_{i}") for i in range(d)]
    z_idx = [header.index(f"z_{i}") for i in range(d)]
    return SamplePairs(data[:, c_idx], data[:, z_idx], mean)
