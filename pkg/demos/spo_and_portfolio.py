"""Covariance regret as a validation oracle and as a risk forecast.

First an SPO+ shortest-path model is trained while its checkpoints are scored
by the covariance oracle (no solves) and by SAA (one solve per call), then the
per-call latency of both oracles is compared. Second, a rolling Markowitz run
on a synthetic returns panel compares the covariance forecast of next month's
regret with the regret actually realized.

    python3 demos/spo_and_portfolio.py
"""
from covregret.portfolio import RollingConfig, rolling_regret_experiment, synthetic_returns
from covregret.spo import SPOConfig, bench_oracles, generate_spo_data, train_spo

data = generate_spo_data(seed=0)
for oracle, B in (("cov", 100), ("saa", 200)):
    res = train_spo(data, SPOConfig(seed=0, oracle=oracle, scenario_count=B))
    print(f"{oracle}: best epoch {res.best_epoch}, validation overhead {res.val_overhead_s * 1e3:.1f} ms")

for row in bench_oracles((10, 100, 500), repetitions=3, data=data):
    extra = "" if row.speedup is None else f"  ({row.speedup:.0f}x the covariance oracle)"
    print(f"{row.oracle:3s} B={row.scenario_count}: {row.mean_ms:.3f} ms/call{extra}")

panel = synthetic_returns(120, 72, seed=1)
out = rolling_regret_experiment(panel, RollingConfig(portfolios_per_month=20, stocks_per_portfolio=30))
s = out.summary()
print(f"portfolio: {s['months']} months, forecast {s['forecast_regret_mean']:.4f}, "
      f"realized {s['realized_regret_mean']:.4f}, correlation {s['forecast_realized_corr']}")
