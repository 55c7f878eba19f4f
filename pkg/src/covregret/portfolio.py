"""Rolling-window Markowitz experiment: covariance-forecast regret against next-month realized regret.

Costs are negated returns, so the portfolio rule is the unconstrained QP
``min c^T z + 1/2 z^T (Sigma_hat + lam I) z`` with ``c = -mu_hat``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .estimators import SchemaError, qp_analytic_cov
from .prob import make_rng, substream_seed

REQUIRED_COLUMNS = ("date", "ticker", "ret")
FILTER_RULES = ("missing_return", "return_floor", "return_cap", "price", "market_cap", "history")


class EmptyUniverse(ValueError):
    pass


@dataclass(frozen=True)
class FilterConfig:
    """Row filters, applied in the order of ``FILTER_RULES``.

    Returns below ``ret_floor`` or above ``ret_cap`` are dropped, as are
    rows with a nonpositive price or a market cap below ``mktcap_min``
    (when those columns exist). A ticker is then kept only on its longest
    run of consecutive panel months, and only if that run has at least
    ``history_min`` months.
    """

    ret_floor: float = -1.0
    ret_cap: float = 10.0
    mktcap_min: float = 5e6
    history_min: int = 60


@dataclass(frozen=True, eq=False)
class ReturnsPanel:
    """Monthly decimal returns, ``returns[month, ticker]``.

    A ticker's entries are finite on one contiguous block of months and NaN
    outside it (not listed). ``filter_counts`` records rows dropped per rule.
    """

    months: tuple[str, ...]
    tickers: tuple[str, ...]
    returns: np.ndarray
    price: np.ndarray | None = None
    mktcap: np.ndarray | None = None
    filter_counts: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.returns.shape


def _num(raw: str, col: str, line: int) -> float:
    raw = raw.strip()
    if raw == "" or raw.upper() in ("NA", "NAN", "NULL", "."):
        return math.nan
    try:
        return float(raw)
    except ValueError:
        raise SchemaError(f"line {line}: column {col!r} is not numeric: {raw!r}") from None


def _longest_run(flags: np.ndarray) -> tuple[int, int]:
    best = (0, 0)
    start = None
    for i, f in enumerate(np.append(flags, False)):
        if f and start is None:
            start = i
        elif not f and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    return best


def load_and_filter(csv_path, cfg: FilterConfig = FilterConfig()) -> ReturnsPanel:
    """Read ``date,ticker,ret[,price,mktcap]`` rows and apply the filters.

    Dates are sorted as strings, so ISO formats (``YYYY-MM`` or
    ``YYYY-MM-DD``) order correctly; "consecutive" means adjacent in the
    sorted list of distinct dates.
    """
    path = Path(csv_path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing columns {missing}; need date,ticker,ret[,price,mktcap]")
        reader.fieldnames = header
        has_price, has_cap = "price" in header, "mktcap" in header
        rows = []
        seen = set()
        for line, rec in enumerate(reader, start=2):
            key = (rec["date"].strip(), rec["ticker"].strip())
            if not key[0] or not key[1]:
                raise SchemaError(f"line {line}: empty date or ticker")
            if key in seen:
                raise SchemaError(f"line {line}: duplicate row for {key}")
            seen.add(key)
            rows.append((key[0], key[1], _num(rec["ret"], "ret", line),
                         _num(rec["price"], "price", line) if has_price else math.nan,
                         _num(rec["mktcap"], "mktcap", line) if has_cap else math.nan))
    if not rows:
        raise EmptyUniverse("no rows")

    counts = dict.fromkeys(FILTER_RULES, 0)
    kept = []
    for r in rows:
        ret, price, cap = r[2], r[3], r[4]
        if math.isnan(ret):
            counts["missing_return"] += 1
        elif ret < cfg.ret_floor:
            counts["return_floor"] += 1
        elif ret > cfg.ret_cap:
            counts["return_cap"] += 1
        elif has_price and not price > 0:
            counts["price"] += 1
        elif has_cap and not cap >= cfg.mktcap_min:
            counts["market_cap"] += 1
        else:
            kept.append(r)

    months = sorted({r[0] for r in rows})
    m_idx = {m: i for i, m in enumerate(months)}
    by_ticker: dict[str, list] = {}
    for r in kept:
        by_ticker.setdefault(r[1], []).append(r)
    tickers = []
    cols = []
    for tk in sorted(by_ticker):
        recs = by_ticker[tk]
        flags = np.zeros(len(months), dtype=bool)
        for r in recs:
            flags[m_idx[r[0]]] = True
        lo, hi = _longest_run(flags)
        in_run = [r for r in recs if lo <= m_idx[r[0]] < hi]
        counts["history"] += len(recs) - (len(in_run) if hi - lo >= cfg.history_min else 0)
        if hi - lo >= cfg.history_min:
            tickers.append(tk)
            cols.append(in_run)
    if not tickers:
        raise EmptyUniverse("no ticker survives the filters")

    T, N = len(months), len(tickers)
    R = np.full((T, N), np.nan)
    P = np.full((T, N), np.nan) if has_price else None
    K = np.full((T, N), np.nan) if has_cap else None
    for j, recs in enumerate(cols):
        for r in recs:
            i = m_idx[r[0]]
            R[i, j] = r[2]
            if P is not None:
                P[i, j] = r[3]
            if K is not None:
                K[i, j] = r[4]
    # Drop calendar months that no surviving ticker covers.
    live = np.any(np.isfinite(R), axis=1)
    lo, hi = np.flatnonzero(live)[[0, -1]]
    sl = slice(lo, hi + 1)
    return ReturnsPanel(tuple(months[sl]), tuple(tickers), R[sl],
                        None if P is None else P[sl], None if K is None else K[sl], counts)


def synthetic_returns(n_stocks: int = 200, months: int = 120, factor_count: int = 3, seed: int = 0) -> ReturnsPanel:
    """Factor-model panel ``r = alpha + B f + e``.

    ``alpha ~ N(0.008, 0.004^2)``; loadings ``B ~ N(1/sqrt(k), 0.3^2)``;
    factors ``f ~ N(0, 0.04^2)``; idiosyncratic ``e ~ N(0, s_j^2)`` with
    ``s_j ~ U[0.04, 0.10]``. Prices start at ``U[10, 100]`` and compound the
    returns; market caps use ``U[1e7, 1e9]`` shares-worth of the starting
    price, so every filter passes by construction. Months are labelled
    ``YYYY-MM`` from 2000-01.
    """
    if n_stocks < 1 or months < 1 or factor_count < 0:
        raise ValueError("n_stocks, months >= 1 and factor_count >= 0")
    rng = make_rng(substream_seed(seed, 1))
    alpha = rng.normal(0.008, 0.004, n_stocks)
    sd = rng.uniform(0.04, 0.10, n_stocks)
    R = alpha + sd * rng.standard_normal((months, n_stocks))
    if factor_count > 0:
        B = rng.normal(1.0 / math.sqrt(factor_count), 0.3, (factor_count, n_stocks))
        f = 0.04 * rng.standard_normal((months, factor_count))
        R = R + f @ B
    p0 = rng.uniform(10.0, 100.0, n_stocks)
    shares = rng.uniform(1e7, 1e9, n_stocks) / p0
    price = p0 * np.cumprod(1.0 + R, axis=0)
    labels = tuple(f"{2000 + m // 12:04d}-{m % 12 + 1:02d}" for m in range(months))
    tickers = tuple(f"S{j:04d}" for j in range(n_stocks))
    return ReturnsPanel(labels, tickers, R, price, price * shares, dict.fromkeys(FILTER_RULES, 0))


def write_panel_csv(panel: ReturnsPanel, path) -> None:
    cols = ["date", "ticker", "ret"] + (["price"] if panel.price is not None else []) \
        + (["mktcap"] if panel.mktcap is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for j, tk in enumerate(panel.tickers):
            for i, m in enumerate(panel.months):
                if not np.isfinite(panel.returns[i, j]):
                    continue
                row = [m, tk, repr(float(panel.returns[i, j]))]
                if panel.price is not None:
                    row.append(repr(float(panel.price[i, j])))
                if panel.mktcap is not None:
                    row.append(repr(float(panel.mktcap[i, j])))
                w.writerow(row)


def shrunk_covariance(X: np.ndarray, floor_rel: float = 1e-6) -> tuple[np.ndarray, float]:
    """Ledoit-Wolf linear shrinkage of the (1/T) sample covariance toward ``(tr S / p) I``.

    Returns the estimate and the shrinkage intensity. The smallest eigenvalue
    is lifted to at least ``floor_rel * tr S / p``.
    """
    X = np.asarray(X, dtype=float)
    T, p = X.shape
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / T
    m = np.trace(S) / p
    if m <= 0:
        return np.zeros((p, p)), 1.0
    target = m * np.eye(p)
    d2 = float(np.sum((S - target) ** 2))
    # (1/T^2) sum_t ||x_t x_t^T - S||_F^2, expanded to avoid p x p temporaries per row.
    row_sq = np.einsum("ij,ij->i", Xc, Xc)
    b2 = float(np.sum(row_sq ** 2) / T - np.sum(S * S)) / T
    delta = 1.0 if d2 <= 0 else min(1.0, max(0.0, b2 / d2))
    Sig = delta * target + (1.0 - delta) * S
    floor = floor_rel * m
    lo = float(np.linalg.eigvalsh(Sig)[0])
    if lo < floor:
        Sig = Sig + (floor - lo) * np.eye(p)
    return Sig, delta


@dataclass(frozen=True)
class RollingConfig:
    window_months: int = 36
    portfolios_per_month: int = 100
    stocks_per_portfolio: int = 50
    lam: float = 1.0
    seed: int = 0
    mean_window: int | None = None
    floor_rel: float = 1e-6

    def __post_init__(self):
        if self.window_months < 12:
            raise ValueError("window_months must be >= 12")
        if self.portfolios_per_month < 1 or self.stocks_per_portfolio < 1:
            raise ValueError("portfolio counts must be >= 1")
        if self.lam <= 0:
            raise ValueError("lambda must be positive (Sigma_hat may be singular)")
        if self.mean_window is not None and not 1 <= self.mean_window <= self.window_months:
            raise ValueError("mean_window must lie in [1, window_months]")


@dataclass
class RollingResult:
    """Per-month averages over the random portfolios.

    ``realized`` is the linear regret ``c^T pi*(c) - c^T pi*(c_hat)`` at the
    next month's cost ``c``, the quantity the covariance formula forecasts.
    ``realized_objective`` compares full QP objectives instead and is
    nonpositive by optimality.
    """

    months: list[str]
    forecast: np.ndarray
    realized: np.ndarray
    realized_objective: np.ndarray
    universe_size: np.ndarray
    config: RollingConfig
    forecast_solves: int = 0

    @property
    def gap(self) -> np.ndarray:
        return self.realized - self.forecast

    def summary(self) -> dict:
        corr = float(np.corrcoef(self.forecast, self.realized)[0, 1]) if len(self.months) > 2 \
            and np.std(self.forecast) > 0 and np.std(self.realized) > 0 else None
        return {
            "months": len(self.months),
            "forecast_regret_mean": float(np.mean(self.forecast)),
            "realized_regret_mean": float(np.mean(self.realized)),
            "realized_objective_regret_mean": float(np.mean(self.realized_objective)),
            "mean_gap": float(np.mean(self.gap)),
            "forecast_realized_corr": corr,
            "forecast_solves": self.forecast_solves,
            "config": asdict(self.config),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["month", "forecast_regret_mean", "realized_regret_mean", "gap",
                        "realized_objective_regret_mean", "universe_size"])
            for i, m in enumerate(self.months):
                w.writerow([m, repr(float(self.forecast[i])), repr(float(self.realized[i])),
                            repr(float(self.gap[i])), repr(float(self.realized_objective[i])),
                            int(self.universe_size[i])])

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2))


def rolling_regret_experiment(panel: ReturnsPanel, cfg: RollingConfig = RollingConfig()) -> RollingResult:
    """For each month ``t`` with a full trailing window and a month ``t+1`` to realize.

    Each portfolio draws ``stocks_per_portfolio`` tickers with replacement
    from those listed over the window and the next month; repeats are
    collapsed. The forecast ``-tr((Sigma_hat + lam I)^{-1} Sigma_hat)`` needs
    no optimisation solve.
    """
    R = panel.returns
    T = R.shape[0]
    W = cfg.window_months
    if T < W + 1:
        raise ValueError(f"panel has {T} months; need more than window_months={W}")
    mw = cfg.mean_window or W
    months, fc, rz, ro, uni = [], [], [], [], []
    for t in range(W - 1, T - 1):
        block = R[t - W + 1:t + 2]
        eligible = np.flatnonzero(np.all(np.isfinite(block), axis=0))
        if eligible.size == 0:
            continue
        rng = make_rng(substream_seed(cfg.seed, t))
        f_sum = r_sum = o_sum = 0.0
        for _ in range(cfg.portfolios_per_month):
            pick = np.unique(rng.choice(eligible, size=cfg.stocks_per_portfolio, replace=True))
            win = R[t - W + 1:t + 1, pick]
            Sig, _ = shrunk_covariance(win, cfg.floor_rel)
            c_hat = -win[-mw:].mean(axis=0)
            c = -R[t + 1, pick]
            f_sum += qp_analytic_cov(Sig, cfg.lam, Sig)
            H = Sig + cfg.lam * np.eye(pick.size)
            L = np.linalg.cholesky(H)
            z_c = -np.linalg.solve(L.T, np.linalg.solve(L, c))
            z_hat = -np.linalg.solve(L.T, np.linalg.solve(L, c_hat))
            r_sum += float(c @ z_c - c @ z_hat)
            o_sum += float((c @ z_c + 0.5 * z_c @ H @ z_c) - (c @ z_hat + 0.5 * z_hat @ H @ z_hat))
        k = cfg.portfolios_per_month
        months.append(panel.months[t + 1])
        fc.append(f_sum / k)
        rz.append(r_sum / k)
        ro.append(o_sum / k)
        uni.append(eligible.size)
    if not months:
        raise EmptyUniverse("no month has a fully listed universe")
    return RollingResult(months, np.array(fc), np.array(rz), np.array(ro), np.array(uni), cfg)
