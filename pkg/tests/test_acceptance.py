"""Acceptance gate: twelve criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; every criterion prints its
line to the terminal regardless of output capture. Criteria are measured at
their stated tolerances; a failing criterion fails its test.
"""
import math
import time

import numpy as np
import pytest
from scipy.stats import norm

from covregret.bounds import clt_confidence_interval, markowitz_residual_term, tail_probability
from covregret.estimators import SamplePairs, cov_regret, decide_rows, qp_analytic_cov, residual_estimator
from covregret.harness import ExperimentConfig, qp_setup, run_experiment
from covregret.prob import sample_costs, substream_seed
from covregret.problems import GenerationFailed, KnapsackInstance, LPInstance, QPInstance, random_lp
from covregret.spo import bench_oracles, generate_spo_data, spo_plus_loss_and_subgradient, SPOConfig, train_spo

from oracles import knapsack_brute_force, lp_min_by_vertices

pytestmark = pytest.mark.acceptance

# known-mean empirical traces seen anywhere in this module, for criterion 12
TRACES: list = []


@pytest.fixture
def report(capsys):
    def _report(num, title, ok, detail, elapsed, budget):
        in_time = elapsed <= budget
        verdict = "PASS" if ok and in_time else "FAIL"
        with capsys.disabled():
            print(f"\n[{verdict}] criterion {num:2d} {title}: {detail}; "
                  f"{elapsed:.1f}s (budget {budget:.0f}s)")
        assert in_time, f"criterion {num} exceeded its runtime budget"
        assert ok, f"criterion {num}: {detail}"
    return _report


def _run(cfg):
    tr = run_experiment(cfg)
    if cfg.mean_mode == "known":
        TRACES.append((cfg.family, cfg.seed, float(tr.running_empirical.max())))
    return tr


def _gap(tr, m):
    emp, cov = tr.running_empirical[m - 1], tr.running_cov[m - 1]
    return abs(cov - emp) / abs(emp)


def test_c01_lp_consistency(report):
    t0 = time.perf_counter()
    g500, g8000 = [], []
    for seed in range(20):
        tr = _run(ExperimentConfig(family="lp", n_vars=10, n_constraints=5, iterations=8000, seed=seed))
        g500.append(_gap(tr, 500))
        g8000.append(_gap(tr, 8000))
    m500, m8000 = float(np.median(g500)), float(np.median(g8000))
    ok = m8000 < m500 and m8000 <= 0.20
    report(1, "LP zero-residual consistency", ok,
           f"median gap {m500:.3f} at n=500, {m8000:.3f} at n=8000 (need smaller and <= 0.20)",
           time.perf_counter() - t0, 300)


def test_c02_unconstrained_qp_exactness(report):
    t0 = time.perf_counter()
    hits = 0
    for seed in range(20):
        cfg = ExperimentConfig(family="qp_unconstrained", n_vars=10, lam=1.0, iterations=5000, seed=seed)
        inst, dist = qp_setup(cfg)
        C = sample_costs(dist, 5000, substream_seed(seed, 4))
        Z = decide_rows(inst, C)
        terms = np.sum((C - C.mean(0)) * (Z - Z.mean(0)), axis=1)
        se = terms.std(ddof=1) / math.sqrt(5000)
        err = abs(cov_regret(SamplePairs(C, Z)).value - qp_analytic_cov(inst.Q, 1.0, dist.cov))
        hits += err <= 4 * se
        _run(cfg)
    report(2, "unconstrained QP exactness", hits >= 18, f"{hits}/20 seeds within 4 SE (need >= 18)",
           time.perf_counter() - t0, 60)


def test_c03_knapsack_caution(report):
    t0 = time.perf_counter()
    lp_gaps, ks_gaps, flips = [], [], 0
    for seed in range(20):
        lp = _run(ExperimentConfig(family="lp", n_vars=10, n_constraints=5, iterations=3000, seed=seed))
        ks = _run(ExperimentConfig(family="knapsack", n_vars=10, iterations=3000, seed=seed))
        lp_gaps.append(_gap(lp, 3000))
        ks_gaps.append(_gap(ks, 3000))
        flips += ks.diagnostics["sign_disagreement"]
    ratio = float(np.median(ks_gaps) / np.median(lp_gaps))
    ok = ratio >= 3 and flips >= 1
    report(3, "knapsack caution ordering", ok,
           f"median gap knapsack {np.median(ks_gaps):.3f} vs LP {np.median(lp_gaps):.3f}, ratio {ratio:.2f} "
           f"(need >= 3); sign flips {flips}/20 (need >= 1)", time.perf_counter() - t0, 600)


def test_c04_residual_bias_decay(report):
    # 1-D QP, z in [-a, a], c ~ N(mu, 1); a puts the bound active with probability 0.5
    t0 = time.perf_counter()
    mu, h = 0.01, 2.0
    a = norm.ppf(0.75) / h
    qp = QPInstance([[1.0]], 1.0, LPInstance([[1.0], [-1.0]], [a, a], nonneg=False))

    def pi(C):
        return np.clip(-C / h, -a, a)

    probe = np.linspace(-3, 3, 13)[:, None]
    assert np.allclose(decide_rows(qp, probe), pi(probe), atol=1e-10)
    grid = mu + norm.ppf((np.arange(10 ** 6) + 0.5) / 10 ** 6)
    r_ref = mu * (pi(grid).mean() - pi(np.array(mu)))
    p_active = float(np.mean(np.abs(grid) / h > a))
    ns, errs = (250, 1000, 4000), []
    for n in ns:
        vals = [residual_estimator(SamplePairs(C, pi(C)), qp)
                for C in (mu + np.random.default_rng([n, s]).standard_normal((n, 1)) for s in range(200))]
        errs.append(abs(np.mean(vals) - r_ref))
    slope = float(np.polyfit(np.log(ns), np.log(errs), 1)[0])
    report(4, "residual estimator bias decay", abs(slope + 1) <= 0.4,
           f"P(active)={p_active:.3f}, |bias| {', '.join(f'{e:.2e}' for e in errs)}, slope {slope:.2f} "
           "(need -1 +/- 0.4)", time.perf_counter() - t0, 600)


def test_c05_concentration_validity(report):
    # box LP z in [0,1]^2 with c ~ U[-1,1]^2: decisions 1{c < 0}, covariance -d/4, ||c|| <= sqrt(d)
    t0 = time.perf_counter()
    d, n, trials = 2, 500, 1000
    box = LPInstance(np.eye(d), np.ones(d))
    truth = -d / 4
    rng = np.random.default_rng(12)
    devs = np.empty(trials)
    for k in range(trials):
        C = rng.uniform(-1, 1, size=(n, d))
        Z = (C < 0).astype(float)
        if k == 0:
            assert np.array_equal(decide_rows(box, C), Z)
        devs[k] = cov_regret(SamplePairs(C, Z)).value - truth
    lines, ok = [], True
    for eps in (0.05, 0.1, 0.2):
        freq = float(np.mean(np.abs(devs) > eps))
        limit = tail_probability(n, eps, math.sqrt(d), 0.0, 0.0) + 3 * math.sqrt(max(freq * (1 - freq), 1e-12) / trials)
        ok &= freq <= limit
        lines.append(f"eps={eps}: freq {freq:.3f} <= {limit:.3f}")
    report(5, "concentration bound validity", ok, "; ".join(lines), time.perf_counter() - t0, 300)


def test_c06_clt_coverage(report):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(family="qp_unconstrained", n_vars=10, seed=6)
    inst, dist = qp_setup(cfg)
    truth = qp_analytic_cov(inst.Q, inst.lam, dist.cov)
    hits = 0
    for r in range(500):
        C = sample_costs(dist, 2000, substream_seed(6000, r))
        ci = clt_confidence_interval(SamplePairs(C, decide_rows(inst, C)), inst, "analytic", 0.95)
        hits += ci.covers(truth)
    cov = hits / 500
    report(6, "CLT coverage", 0.90 <= cov <= 0.98, f"coverage {cov:.3f} (need 0.90-0.98)",
           time.perf_counter() - t0, 300)


def test_c07_markowitz_scaling(report):
    # long-only two-asset Markowitz, Q = t Sigma0, c ~ N(mu, t Sigma0); mu puts the mean optimum
    # on the z >= 0 kink for every t (exact residual sqrt(t) / ((2 + t) sqrt(2 pi)))
    t0 = time.perf_counter()
    S0 = np.array([[2.0, 1.0], [1.0, 1.0]])
    mu = np.array([0.5, -0.5])
    simplex = LPInstance(np.zeros((0, 2)), np.zeros(0), A_eq=[[1.0, 1.0]], b_eq=[1.0])
    E = np.random.default_rng(7).standard_normal((20000, 2)) @ np.linalg.cholesky(S0).T
    ts, meas, pred = (0.2, 0.1, 0.05), [], []
    for t in ts:
        qp = QPInstance(t * S0, 1.0, simplex)
        Z = decide_rows(qp, mu + math.sqrt(t) * E)
        meas.append(float(mu @ (Z.mean(axis=0) - qp(mu))))
        pred.append(markowitz_residual_term(1.0, t * S0, mu))
    slope = float(np.polyfit(np.log(ts), np.log(np.abs(meas)), 1)[0])
    report(7, "Markowitz residual scaling", abs(slope - 2) <= 0.5,
           f"residual {', '.join(f'{m:.4f}' for m in meas)} (leading term {', '.join(f'{p:.1e}' for p in pred)}), "
           f"slope {slope:.2f} (need 2 +/- 0.5)", time.perf_counter() - t0, 300)


def _mean_gap_slope(cov_scale, ns, seeds=50):
    diffs = []
    for seed in range(seeds):
        base = dict(family="qp_unconstrained", n_vars=10, iterations=max(ns), seed=seed, cov_scale=cov_scale)
        known = _run(ExperimentConfig(mean_mode="known", **base))
        est = run_experiment(ExperimentConfig(mean_mode="estimated", **base))
        diffs.append([abs(est.running_empirical[n - 1] - known.running_empirical[n - 1]) for n in ns])
    med = np.median(np.array(diffs), axis=0)
    return med, float(np.polyfit(np.log(ns), np.log(med), 1)[0])


def test_c08_estimated_mean_rate(report):
    # the gap is mu^T H^-1 e + e^T H^-1 e with e = cbar - mu; the first term carries the n^-1/2 rate,
    # the second is O(1/n) and dominates small n when noise is large, so gate at the generator's unit scale
    t0 = time.perf_counter()
    ns = (100, 400, 1600)
    med, slope = _mean_gap_slope(1.0, ns)
    _, loud = _mean_gap_slope(ExperimentConfig().cov_scale, ns)
    report(8, "estimated-mean rate", abs(slope + 0.5) <= 0.2,
           f"median |diff| {', '.join(f'{m:.3f}' for m in med)}, slope {slope:.2f} (need -0.5 +/- 0.2); "
           f"slope at harness default noise scale {loud:.2f}", time.perf_counter() - t0, 300)


def test_c09_oracle_speedup(report):
    t0 = time.perf_counter()
    rows = bench_oracles(repetitions=5, seed=0, cov_per_count=True)
    cov_ms = np.array([r.mean_ms for r in rows if r.oracle == "cov" and r.scenario_count is not None])
    cv = float(cov_ms.std() / cov_ms.mean())
    speedup = next(r.speedup for r in rows if r.oracle == "saa" and r.scenario_count == 500)
    report(9, "oracle speedup shape", cv <= 0.20 and speedup > 10,
           f"cov latency CV {cv:.3f} across counts (need <= 0.20), speedup at B=500 {speedup:.1f}x (need > 10)",
           time.perf_counter() - t0, 120)


def test_c10_spo_sanity(report):
    t0 = time.perf_counter()
    data = generate_spo_data(seed=0)
    worst = max(abs(spo_plus_loss_and_subgradient(c, c, z, data.grid)[0])
                for c, z in zip(data.costs, data.hindsight_decisions))
    runs = {"cov": train_spo(data, SPOConfig(seed=0, oracle="cov"))}
    for B in (50, 200):
        runs[f"saa{B}"] = train_spo(data, SPOConfig(seed=0, oracle="saa", scenario_count=B))
    done = all(len(r.log) == 20 for r in runs.values())
    over = {k: r.val_overhead_s for k, r in runs.items()}
    ok = done and worst <= 1e-10 and over["cov"] < over["saa50"] and over["cov"] < over["saa200"]
    report(10, "SPO+ loop sanity", ok,
           f"completed {done}, max loss at c_hat=c {worst:.1e}, val overhead "
           + ", ".join(f"{k} {v * 1e3:.2f}ms" for k, v in over.items()), time.perf_counter() - t0, 180)


def test_c11_solver_oracles(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    lp_checked = lp_bad = skipped = 0
    seed = 0
    while lp_checked < 500:
        n, d = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        seed += 1
        try:
            inst = random_lp(n, d, seed)
        except GenerationFailed:
            skipped += 1
            continue
        c = rng.normal(size=n)
        ref, _ = lp_min_by_vertices(inst.A, inst.b, c)
        z = inst(c)
        lp_bad += not (inst.is_feasible(z) and abs(c @ z - ref) <= 1e-7 * (1 + abs(ref)))
        lp_checked += 1
    ks_bad = 0
    for _ in range(200):
        d = int(rng.integers(1, 21))
        w = rng.uniform(1, 10, d)
        v = rng.normal(5, 2, d)
        inst = KnapsackInstance(w, rng.uniform(0, w.sum()))
        z = inst(-v)
        ks_bad += not (w @ z <= inst.capacity + 1e-9 and abs(v @ z - knapsack_brute_force(v, w, inst.capacity)) <= 1e-9)
    report(11, "solver oracle equivalence", lp_bad == 0 and ks_bad == 0,
           f"LP mismatches {lp_bad}/500 ({skipped} generator rejections skipped), knapsack mismatches {ks_bad}/200",
           time.perf_counter() - t0, 120)


def test_c12_sign_invariant(report):
    t0 = time.perf_counter()
    for family in ("lp", "qp_unconstrained", "qp_constrained", "knapsack"):
        for seed in range(5):
            _run(ExperimentConfig(family=family, n_vars=8, n_constraints=5, iterations=2000, seed=seed))
    worst = max(TRACES, key=lambda t: t[2])
    families = sorted({t[0] for t in TRACES})
    report(12, "sign invariant", worst[2] <= 1e-8,
           f"{len(TRACES)} known-mean traces over {families}; max running empirical regret {worst[2]:.3g} "
           f"({worst[0]}, seed {worst[1]})", time.perf_counter() - t0, 300)
