"""Dense symmetric linear algebra and seeded Gaussian cost sampling.

Every random draw in the package goes through :func:`make_rng`, which wraps
NumPy's PCG64 bit generator (O'Neill 2014, 128-bit LCG state with an XSL-RR
output permutation). PCG64 streams are identical across platforms for a given
integer seed, so replications are portable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYMMETRY_RTOL = 1e-12
PIVOT_RTOL = 1e-12


class NotPositiveDefinite(ValueError):
    """Raised when a Cholesky pivot falls below tolerance."""


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(seed: int, index: int) -> int:
    """Per-task seed for parallel Monte Carlo: ``seed XOR index``."""
    return (int(seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF


def substream_seed(seed: int, tag: int) -> int:
    """Seed for the ``tag``-th ingredient of one experiment.

    Unlike :func:`derive_seed`, distinct ``(seed, tag)`` pairs never share a
    stream, so ingredients of neighbouring experiment seeds stay independent.
    """
    ss = np.random.SeedSequence([int(seed), int(tag)])
    return int(ss.generate_state(1, np.uint64)[0])


def as_cov_matrix(cov) -> np.ndarray:
    """Validate shape and symmetry of a covariance matrix and return it as float array."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    scale = max(np.max(np.abs(cov)), 1.0) if cov.size else 1.0
    if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise ValueError("covariance matrix is not symmetric")
    return cov


def cholesky_factor(cov) -> np.ndarray:
    """Lower-triangular L with L @ L.T == cov.

    Column-oriented Cholesky-Banachiewicz. A pivot at or below
    ``1e-12 * max(diag(cov))`` raises :class:`NotPositiveDefinite`.
    """
    a = as_cov_matrix(cov)
    d = a.shape[0]
    tol = PIVOT_RTOL * max(np.max(np.diag(a)), 0.0)
    L = np.zeros_like(a)
    for j in range(d):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > tol:
            raise NotPositiveDefinite(f"pivot {j} is {pivot:.3e} (tolerance {tol:.3e})")
        L[j, j] = np.sqrt(pivot)
        if j + 1 < d:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True)
class CostDistribution:
    """Gaussian law of the cost vector, with its Cholesky factor cached."""

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = as_cov_matrix(self.cov)
        if cov.shape[0] != mean.shape[0]:
            raise ValueError("mean and covariance dimensions differ")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", cholesky_factor(cov))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def sample_costs(dist: CostDistribution, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. rows ``mean + L g`` with ``g`` standard normal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = make_rng(seed).standard_normal((n, dist.dim))
    return dist.mean + g @ dist.chol.T


def random_pd_matrix(d: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """``scale * (G G^T / d + 0.1 I)`` with G standard normal; eigenvalues >= 0.1*scale."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if not scale > 0:
        raise ValueError("scale must be positive")
    G = make_rng(seed).standard_normal((d, d))
    S = scale * (G @ G.T / d + 0.1 * np.eye(d))
    return 0.5 * (S + S.T)
