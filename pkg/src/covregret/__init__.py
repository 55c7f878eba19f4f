"""Regret estimation for stochastic optimisation via the cost-decision covariance.

Regret is ``E[c^T pi*(c)] - E[c^T pi*(E[c])]`` (nonpositive for linear
objectives). It splits into ``Cov(c, pi*(c))`` plus a residual
``E[c]^T (E[pi*(c)] - pi*(E[c]))``; this package estimates both, bounds the
residual, and ships exact solvers and the replication experiments.
"""
from .bounds import (
    ConfidenceInterval,
    NonpositiveModulus,
    ResidualBounds,
    ZeroMean,
    clt_confidence_interval,
    concentration_sample_size,
    lipschitz_residual_bound,
    markowitz_residual_term,
    normal_quantile,
    residual_bounds,
    smooth_residual_bound,
    strongly_convex_residual_bound,
    tail_probability,
)
from .estimators import (
    InsufficientSamples,
    RegretEstimate,
    SamplePairs,
    SchemaError,
    corrected_regret,
    cov_regret,
    empirical_regret,
    qp_analytic_cov,
    read_pairs_csv,
    residual_estimator,
    saa_regret,
    write_pairs_csv,
)
from .prob import (
    CostDistribution,
    NotPositiveDefinite,
    cholesky_factor,
    make_rng,
    random_pd_matrix,
    sample_costs,
)

__version__ = "0.1.0"

__all__ = [
    "ConfidenceInterval",
    "CostDistribution",
    "InsufficientSamples",
    "NonpositiveModulus",
    "NotPositiveDefinite",
    "RegretEstimate",
    "ResidualBounds",
    "SamplePairs",
    "SchemaError",
    "ZeroMean",
    "cholesky_factor",
    "clt_confidence_interval",
    "concentration_sample_size",
    "corrected_regret",
    "cov_regret",
    "empirical_regret",
    "lipschitz_residual_bound",
    "make_rng",
    "markowitz_residual_term",
    "normal_quantile",
    "qp_analytic_cov",
    "random_pd_matrix",
    "read_pairs_csv",
    "residual_bounds",
    "residual_estimator",
    "saa_regret",
    "sample_costs",
    "smooth_residual_bound",
    "strongly_convex_residual_bound",
    "tail_probability",
    "write_pairs_csv",
]
