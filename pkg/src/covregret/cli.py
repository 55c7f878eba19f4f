"""``covregret`` command line.

Exit codes: 0 success, 1 runtime failure (solver, generation), 2 bad
configuration or input (flags, schemas, missing files).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, portfolio, spo
from .bounds import clt_confidence_interval
from .estimators import (
    InsufficientSamples,
    SchemaError,
    corrected_regret,
    cov_regret,
    empirical_regret,
    read_pairs_csv,
    residual_estimator,
    RegretEstimate,
    saa_regret,
)
from .parallel import worker_count
from .problems import GenerationFailed, SolverError, load_instance

FAMILY_ALIASES = {"lp": "lp", "qp": "qp_unconstrained", "qp-con": "qp_constrained", "knapsack": "knapsack"}


class ConfigFailure(Exception):
    """Input or configuration problem; exit code 2."""


def _write_rows(rows: list[dict], path, fmt: str) -> None:
    out = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        if fmt == "json":
            json.dump(rows, out, indent=1)
            out.write("\n")
        else:
            w = csv.DictWriter(out, list(rows[0].keys()) if rows else [])
            w.writeheader()
            w.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()


def _sidecar(path) -> Path | None:
    if path in (None, "-"):
        return None
    p = Path(path)
    return p.with_name(p.stem + ".summary.json")


def _emit_summary(doc: dict, out_path) -> None:
    text = json.dumps(doc, default=_jsonable)
    print(text)
    side = _sidecar(out_path)
    if side is not None:
        side.write_text(json.dumps(doc, indent=2, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x).__name__}")


def _num(x):
    return None if x is None or (isinstance(x, float) and np.isnan(x)) else float(x)


# -- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = harness.ExperimentConfig(
        family=FAMILY_ALIASES[args.family], n_vars=args.n_vars, n_constraints=args.n_cons,
        iterations=args.iters, lam=args.lam, seed=args.seed, mean_mode=args.mean_mode,
        cov_scale=args.cov_scale, mean_scale=args.mean_scale, box=args.box, w_max=args.w_max,
    )
    tr = harness.run_experiment(cfg)
    if args.out is not None:
        rows = []
        for i in range(len(tr)):
            row = {"iter": i + 1, "running_empirical": float(tr.running_empirical[i]),
                   "running_cov": float(tr.running_cov[i])}
            if tr.analytic is not None:
                row["analytic"] = tr.analytic
            if tr.residual_hat is not None:
                row["residual_hat"] = _num(tr.residual_hat[i])
                if args.format == "csv" and row["residual_hat"] is None:
                    row["residual_hat"] = ""
            rows.append(row)
        _write_rows(rows, args.out, args.format)
    _emit_summary(tr.summary, args.out)
    return 0


# -- estimate ---------------------------------------------------------------

SOLVER_METHODS = ("saa", "residual", "corrected", "empirical")


def cmd_estimate(args) -> int:
    if not Path(args.pairs).is_file():
        raise ConfigFailure(f"no such file: {args.pairs}")
    mean = None if args.mean is None else np.array([float(v) for v in args.mean.split(",")])
    pairs = read_pairs_csv(args.pairs, mean)
    if mean is not None and mean.shape[0] != pairs.costs.shape[1]:
        raise ConfigFailure("--mean length does not match the cost dimension")
    solver = None
    if args.problem is not None:
        if not Path(args.problem).is_file():
            raise ConfigFailure(f"no such file: {args.problem}")
        solver = load_instance(args.problem)
        if solver.n_vars != pairs.costs.shape[1]:
            raise ConfigFailure("problem dimension does not match the pairs file")
    if args.method in SOLVER_METHODS and solver is None:
        raise ConfigFailure(f"--method {args.method} needs --problem")

    if args.method == "cov":
        est = cov_regret(pairs, unbiased=args.unbiased)
    elif args.method == "empirical":
        est = empirical_regret(pairs.costs, solver, mean=pairs.mean, decisions=pairs.decisions)
    elif args.method == "saa":
        B = args.scenario_count or pairs.n
        est = saa_regret(pairs.costs, solver, B, args.seed, replace=args.replace, decisions=pairs.decisions)
    elif args.method == "residual":
        est = RegretEstimate(residual_estimator(pairs, solver), "residual", pairs.n, extras={"solve_count": 1})
    elif args.method == "corrected":
        est = corrected_regret(pairs, solver)
    else:
        if args.grad != "zero" and solver is None:
            raise ConfigFailure(f"--grad {args.grad} needs --problem")
        ci = clt_confidence_interval(pairs, solver, args.grad, args.level)
        est = RegretEstimate(ci.center, "cov", ci.n, variance=ci.variance_estimate,
                             stderr=float(np.sqrt(ci.variance_estimate / ci.n)),
                             ci=(ci.lower, ci.upper),
                             extras={"center": ci.center, "half_width": ci.half_width, "level": ci.level,
                                     "variance_form": ci.variance_form})
    doc = est.to_dict()
    if args.format == "csv":
        flat = {k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in doc.items()}
        _write_rows([flat], args.out, "csv")
    elif args.out not in (None, "-"):
        Path(args.out).write_text(json.dumps(doc, indent=2, default=_jsonable) + "\n")
        print(json.dumps(doc, default=_jsonable))
    else:
        print(json.dumps(doc, default=_jsonable))
    return 0


# -- spo --------------------------------------------------------------------

def cmd_spo(args) -> int:
    data = spo.generate_spo_data(p=args.p, grid_rows=args.grid, grid_cols=args.grid,
                                 sizes=(args.n_train, args.n_val, args.n_test),
                                 noise_sd=args.noise, seed=args.seed)
    if args.action == "train":
        cfg = spo.SPOConfig(lr=args.lr, batch=args.batch, epochs=args.epochs, eval_every=args.eval_every,
                            oracle=args.oracle, scenario_count=args.scenario_count, seed=args.seed,
                            loss=args.loss)
        res = spo.train_spo(data, cfg)
        if args.out is not None:
            rows = [{"epoch": r.epoch, "train_loss": r.train_loss,
                     "val_regret_cov": _blank(r.val_regret_cov, args.format),
                     "val_regret_saa": _blank(r.val_regret_saa, args.format),
                     "val_ms": _blank(r.val_ms, args.format)} for r in res.log]
            _write_rows(rows, args.out, args.format)
        _emit_summary(res.summary(), args.out)
        return 0
    counts = tuple(int(v) for v in args.scenario_counts.split(","))
    if any(b < 1 for b in counts):
        raise ConfigFailure("scenario counts must be positive")
    timings = spo.bench_oracles(counts, args.reps, args.seed, data=data)
    rows = [t.to_row() for t in timings]
    if args.format == "json":
        rows = [{k: (None if v == "" else v) for k, v in r.items()} for r in rows]
    _write_rows(rows, args.out, args.format)
    return 0


def _blank(v, fmt):
    if v is None:
        return None if fmt == "json" else ""
    return v


# -- portfolio --------------------------------------------------------------

def cmd_portfolio(args) -> int:
    if (args.csv is None) == (not args.synthetic):
        raise ConfigFailure("give exactly one of --csv or --synthetic")
    if args.csv is not None:
        if not Path(args.csv).is_file():
            raise ConfigFailure(f"no such file: {args.csv}")
        panel = portfolio.load_and_filter(args.csv, portfolio.FilterConfig(history_min=args.history_min))
    else:
        panel = portfolio.synthetic_returns(args.n_stocks, args.months, args.factors, args.seed)
    cfg = portfolio.RollingConfig(window_months=args.window, portfolios_per_month=args.portfolios,
                                  stocks_per_portfolio=args.stocks, lam=args.lam, seed=args.seed,
                                  mean_window=args.mean_window)
    res = portfolio.rolling_regret_experiment(panel, cfg)
    rows = [{"month": m, "forecast_regret_mean": float(res.forecast[i]),
             "realized_regret_mean": float(res.realized[i]), "gap": float(res.gap[i]),
             "realized_objective_regret_mean": float(res.realized_objective[i]),
             "universe_size": int(res.universe_size[i])} for i, m in enumerate(res.months)]
    if args.out is not None:
        _write_rows(rows, args.out, args.format)
    doc = res.summary()
    doc["filter_counts"] = panel.filter_counts
    _emit_summary(doc, args.out)
    return 0


# -- parser -----------------------------------------------------------------

def _common(p, seed_required: bool):
    p.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0,
                   help="random seed" + (" (required)" if seed_required else ""))
    p.add_argument("--out", default=None, help="output file ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="covregret", description="Covariance-based regret estimation toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a replication experiment and write its convergence trace")
    p.add_argument("family", choices=tuple(FAMILY_ALIASES))
    p.add_argument("--n-vars", type=int, default=10)
    p.add_argument("--n-cons", type=int, default=5)
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--mean-mode", choices=("known", "estimated"), default="known")
    p.add_argument("--cov-scale", type=float, default=harness.ExperimentConfig.cov_scale)
    p.add_argument("--mean-scale", type=float, default=1.0)
    p.add_argument("--box", type=float, default=1.0, help="qp-con bound |z_j| <= box")
    p.add_argument("--w-max", type=float, default=10.0, help="knapsack weight upper bound")
    _common(p, True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate regret from a pairs CSV")
    p.add_argument("pairs", help="CSV with header c_0..c_{d-1}, z_0..z_{d-1}")
    p.add_argument("--method", choices=("cov", "empirical", "saa", "residual", "corrected", "ci"), default="cov")
    p.add_argument("--problem", default=None, help="instance JSON (needed by saa/residual/corrected/empirical)")
    p.add_argument("--mean", default=None, help="known cost mean, comma separated")
    p.add_argument("--scenario-count", type=int, default=None)
    p.add_argument("--replace", action="store_true", help="SAA draws with replacement")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--grad", choices=("zero", "analytic", "fd"), default="zero",
                   help="decision-map Jacobian for ci (analytic: unconstrained QP only)")
    p.add_argument("--unbiased", action="store_true", help="1/(n-1) covariance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("spo", help="SPO+ training and validation-oracle benchmark")
    p.add_argument("action", choices=("train", "bench"))
    p.add_argument("--p", type=int, default=10, help="context dimension")
    p.add_argument("--grid", type=int, default=4, help="grid side length")
    p.add_argument("--n-train", type=int, default=200)
    p.add_argument("--n-val", type=int, default=100)
    p.add_argument("--n-test", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--eval-every", type=int, default=2)
    p.add_argument("--oracle", choices=("cov", "saa"), default="cov")
    p.add_argument("--scenario-count", type=int, default=100)
    p.add_argument("--loss", choices=tuple(spo.LOSSES), default="aux")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--scenario-counts", default=",".join(map(str, spo.DEFAULT_SCENARIO_COUNTS)))
    _common(p, True)
    p.set_defaults(func=cmd_spo)

    p = sub.add_parser("portfolio", help="rolling-window Markowitz regret experiment")
    p.add_argument("action", choices=("run",))
    p.add_argument("--csv", default=None, help="returns CSV date,ticker,ret[,price,mktcap]")
    p.add_argument("--synthetic", action="store_true", help="use the synthetic factor-model panel")
    p.add_argument("--n-stocks", type=int, default=200)
    p.add_argument("--months", type=int, default=120)
    p.add_argument("--factors", type=int, default=3)
    p.add_argument("--history-min", type=int, default=60)
    p.add_argument("--window", type=int, default=36)
    p.add_argument("--mean-window", type=int, default=None)
    p.add_argument("--portfolios", type=int, default=100)
    p.add_argument("--stocks", type=int, default=50)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    _common(p, True)
    p.set_defaults(func=cmd_portfolio)
    return ap


CONFIG_ERRORS = (ConfigFailure, SchemaError, InsufficientSamples, portfolio.EmptyUniverse,
                 harness.ConfigError, FileNotFoundError, ValueError)
RUNTIME_ERRORS = (SolverError, GenerationFailed, ArithmeticError, RuntimeError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        worker_count()
        return args.func(args)
    except RUNTIME_ERRORS as exc:
        print(f"covregret: error: {exc}", file=sys.stderr)
        return 1
    except CONFIG_ERRORS as exc:
        print(f"covregret: config error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
