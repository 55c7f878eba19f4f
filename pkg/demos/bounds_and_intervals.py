"""Residual bounds, a sample-size calculation and a confidence interval.

    python3 demos/bounds_and_intervals.py
"""
import numpy as np

from covregret.bounds import (
    clt_confidence_interval,
    concentration_sample_size,
    markowitz_residual_term,
    residual_bounds,
)
from covregret.estimators import SamplePairs, decide_rows
from covregret.prob import CostDistribution, random_pd_matrix, sample_costs
from covregret.problems import QPInstance

d = 5
mean = np.ones(d)
Sigma = random_pd_matrix(d, 3)
print(residual_bounds(mean, Sigma, L=2.0, M=1.0, mu_sc=1.5))

# Markowitz term under Q = t Sigma0 (its leading order shrinks like t^3)
for t in (0.4, 0.2, 0.1):
    print(f"t={t}: markowitz term {markowitz_residual_term(1.0, t * Sigma, mean):.2e}")

n = concentration_sample_size(cost_bound=np.sqrt(d), L=0.0, sigma_sq=0.0, epsilon=0.1, delta=0.05)
print(f"samples for |cov - truth| <= 0.1 w.p. 0.95: {n}")

qp = QPInstance(random_pd_matrix(d, 4), 1.0)
C = sample_costs(CostDistribution(mean, Sigma), 2000, 5)
pairs = SamplePairs(C, decide_rows(qp, C))
for grad in ("zero", "analytic"):
    ci = clt_confidence_interval(pairs, qp, grad, 0.95)
    print(f"grad={grad:8s} {ci.center:.4f} +/- {ci.half_width:.4f} ({ci.variance_form})")
