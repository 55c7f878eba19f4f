"""SPO+ training on the grid shortest-path LP with covariance and SAA validation oracles."""
from __future__ import annotations

import csv
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimators import RegretEstimate
from .prob import make_rng, substream_seed
from .problems import GridFlowInstance

SPLITS = ("train", "val", "test")
DEFAULT_SCENARIO_COUNTS = (10, 25, 50, 100, 200, 500)
COST_FLOOR = 1e-2

_S_CONTEXT, _S_WSTAR, _S_NOISE, _S_INIT, _S_ORDER, _S_BENCH = 1, 2, 3, 4, 5, 6


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True, eq=False)
class SPODataset:
    contexts: np.ndarray
    costs: np.ndarray
    hindsight_decisions: np.ndarray
    sizes: tuple[int, int, int]
    grid: GridFlowInstance
    w_star: np.ndarray

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(contexts, costs, hindsight decisions)`` of one split."""
        i = SPLITS.index(name)
        lo = sum(self.sizes[:i])
        sl = slice(lo, lo + self.sizes[i])
        return self.contexts[sl], self.costs[sl], self.hindsight_decisions[sl]


def generate_spo_data(p: int = 10, grid_rows: int = 4, grid_cols: int = 4, sizes=(200, 100, 100),
                      noise_sd: float = 0.3, seed: int = 0, w_scale: float = 1.0) -> SPODataset:
    """Contexts ``x ~ N(0, I_p)`` and costs ``sigmoid(x W*) + eps`` clipped at 1e-2.

    ``W*`` has i.i.d. ``N(0, w_scale^2)`` entries. Hindsight decisions are
    solved once here and cached.
    """
    grid = GridFlowInstance(grid_rows, grid_cols)
    n = int(sum(sizes))
    d = grid.n_edges
    X = make_rng(substream_seed(seed, _S_CONTEXT)).standard_normal((n, p))
    W = w_scale * make_rng(substream_seed(seed, _S_WSTAR)).standard_normal((p, d))
    eps = noise_sd * make_rng(substream_seed(seed, _S_NOISE)).standard_normal((n, d))
    C = np.maximum(sigmoid(X @ W) + eps, COST_FLOOR)
    Z = np.array([grid(c) for c in C])
    return SPODataset(X, C, Z, tuple(int(s) for s in sizes), grid, W)


def spo_plus_loss_and_subgradient(c_hat, c, z_star, solver) -> tuple[float, np.ndarray]:
    """``c^T z(2 c_hat - c) - c^T z_star`` and its subgradient ``2 z(2 c_hat - c)`` in ``c_hat``.

    ``z(v)`` is the minimiser of ``v^T z``; one auxiliary solve.
    """
    c = np.asarray(c, dtype=float)
    z_aux = np.asarray(solver(2.0 * np.asarray(c_hat, dtype=float) - c), dtype=float)
    return float(c @ z_aux - c @ np.asarray(z_star, dtype=float)), 2.0 * z_aux


def spo_plus_standard(c_hat, c, z_star, solver) -> tuple[float, np.ndarray]:
    """Textbook SPO+: ``max_z (c - 2 c_hat)^T z + 2 c_hat^T z* - c^T z*``, subgradient ``2 (z* - z(2 c_hat - c))``.

    Swap-in alternative to :func:`spo_plus_loss_and_subgradient`, whose
    subgradient pushes predictions toward the auxiliary path instead of away
    from it.
    """
    c = np.asarray(c, dtype=float)
    c_hat = np.asarray(c_hat, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    z_aux = np.asarray(solver(2.0 * c_hat - c), dtype=float)
    loss = (c - 2.0 * c_hat) @ z_aux + 2.0 * c_hat @ z_star - c @ z_star
    return float(loss), 2.0 * (z_star - z_aux)


LOSSES = {"aux": spo_plus_loss_and_subgradient, "standard": spo_plus_standard}


def validation_oracle_cov(val_costs, val_decisions) -> RegretEstimate:
    """Sample covariance over cached validation pairs in one pass; no solves."""
    C = np.asarray(val_costs, dtype=float)
    Z = np.asarray(val_decisions, dtype=float)
    n = C.shape[0]
    value = (np.einsum("ij,ij->", C, Z) - C.sum(axis=0) @ Z.sum(axis=0) / n) / n
    return RegretEstimate(float(value), "cov", n, extras={"solve_count": 0})


def validation_oracle_saa(val_costs, val_decisions, solver, scenario_count: int, seed: int,
                          benchmark_cost=None) -> RegretEstimate:
    """``mean c_i^T z*_i - mean c_i^T pi*(cbar)`` over ``scenario_count`` drawn scenarios.

    ``cbar`` is ``benchmark_cost`` when given (the training loop passes the
    model's mean prediction on the validation split), else the mean of the
    whole validation split. Draws are without replacement unless ``scenario_count``
    exceeds the split. Exactly one solve.
    """
    C = np.asarray(val_costs, dtype=float)
    Z = np.asarray(val_decisions, dtype=float)
    n = C.shape[0]
    B = int(scenario_count)
    if B < 1:
        raise ValueError("scenario_count must be >= 1")
    if B == n:
        idx = np.arange(n)
    else:
        idx = make_rng(seed).choice(n, size=B, replace=B > n)
    Cb, Zb = C[idx], Z[idx]
    c_bar = C.mean(axis=0) if benchmark_cost is None else np.asarray(benchmark_cost, dtype=float)
    z_bar = np.asarray(solver(c_bar), dtype=float)
    value = float(np.einsum("ij,ij->i", Cb, Zb).mean() - Cb.mean(axis=0) @ z_bar)
    return RegretEstimate(value, "saa", B, extras={"solve_count": 1})


@dataclass(frozen=True)
class SPOConfig:
    lr: float = 5e-3
    batch: int = 16
    epochs: int = 20
    eval_every: int = 2
    oracle: str = "cov"
    scenario_count: int = 100
    seed: int = 0
    loss: str = "aux"
    init_scale: float = 0.1
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.oracle not in ("cov", "saa"):
            raise ValueError("oracle must be 'cov' or 'saa'")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {sorted(LOSSES)}")
        if self.lr < 0 or self.batch < 1 or self.epochs < 1 or self.eval_every < 1 or self.scenario_count < 1:
            raise ValueError("invalid SPO training configuration")


class Adam:
    def __init__(self, shape, lr, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, W, g):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        m_hat = self.m / (1 - self.b1 ** self.t)
        v_hat = self.v / (1 - self.b2 ** self.t)
        return W - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def predict(X, W) -> np.ndarray:
    return np.maximum(X @ W, 0.0)


@dataclass
class LogRow:
    epoch: int
    train_loss: float
    val_regret_cov: float | None = None
    val_regret_saa: float | None = None
    val_ms: float | None = None


@dataclass
class TrainingResult:
    config: SPOConfig
    log: list[LogRow]
    best_epoch: int
    best_val_regret: float
    W: np.ndarray
    W_final: np.ndarray
    train_time_s: float
    val_overhead_s: float
    val_calls: int
    test_cov_regret: float
    test_decision_regret: float
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "oracle": self.config.oracle,
            "scenario_count": self.config.scenario_count if self.config.oracle == "saa" else None,
            "train_time_s": self.train_time_s,
            "val_overhead_s": self.val_overhead_s,
            "val_calls": self.val_calls,
            "best_epoch": self.best_epoch,
            "best_val_regret": self.best_val_regret,
            "test_cov_regret": self.test_cov_regret,
            "test_abs_regret": abs(self.test_cov_regret),
            "test_decision_regret": self.test_decision_regret,
        }

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_regret_cov", "val_regret_saa", "val_ms"])
            for r in self.log:
                w.writerow([r.epoch, repr(r.train_loss)] + ["" if v is None else repr(v)
                            for v in (r.val_regret_cov, r.val_regret_saa, r.val_ms)])


def decision_regret(X, C, Z, W, solver) -> float:
    """Mean excess cost ``c_i^T (pi*(c_hat_i) - z*_i)`` of acting on predictions (>= 0)."""
    C_hat = predict(X, W)
    return float(np.mean([c @ (np.asarray(solver(ch)) - z) for c, ch, z in zip(C, C_hat, Z)]))


def train_spo(data: SPODataset, cfg: SPOConfig = SPOConfig()) -> TrainingResult:
    """Adam on the SPO+ subgradient with a ReLU linear predictor.

    ``cfg.loss`` picks the surrogate: ``"aux"`` (default, the auxiliary-path loss) or ``"standard"``.

    Checkpoint ``k`` is the model after ``k`` completed epochs; checkpoints
    ``0, eval_every, 2 eval_every, ...`` below ``epochs`` are validated and the
    one with the smallest ``|validation regret|`` is kept (earliest on ties).
    Log row ``k`` holds that validation and the mean training loss of the
    epoch that starts from checkpoint ``k``.
    """
    solver = data.grid
    loss_fn = LOSSES[cfg.loss]
    Xtr, Ctr, Ztr = data.split("train")
    Xva, Cva, Zva = data.split("val")
    Xte, Cte, Zte = data.split("test")
    p, d = Xtr.shape[1], Ctr.shape[1]
    W = cfg.init_scale * make_rng(substream_seed(cfg.seed, _S_INIT)).standard_normal((p, d))
    opt = Adam(W.shape, cfg.lr, cfg.betas, cfg.adam_eps)
    order_rng = make_rng(substream_seed(cfg.seed, _S_ORDER))
    log: list[LogRow] = []
    best = (np.inf, -1, None, None)
    overhead = 0.0
    calls = 0
    t_start = time.perf_counter()
    for epoch in range(cfg.epochs):
        row = LogRow(epoch, float("nan"))
        if epoch % cfg.eval_every == 0:
            t0 = time.perf_counter()
            if cfg.oracle == "cov":
                val = validation_oracle_cov(Cva, Zva).value
                row.val_regret_cov = val
            else:
                bench = predict(Xva, W).mean(axis=0)
                val = validation_oracle_saa(Cva, Zva, solver, cfg.scenario_count,
                                            substream_seed(cfg.seed, _S_BENCH), bench).value
                row.val_regret_saa = val
            dt = time.perf_counter() - t0
            row.val_ms = dt * 1e3
            overhead += dt
            calls += 1
            if abs(val) < best[0]:
                best = (abs(val), epoch, val, W.copy())
        losses = []
        perm = order_rng.permutation(Xtr.shape[0])
        for start in range(0, perm.size, cfg.batch):
            idx = perm[start:start + cfg.batch]
            pre = Xtr[idx] @ W
            C_hat = np.maximum(pre, 0.0)
            G = np.zeros_like(C_hat)
            for j, i in enumerate(idx):
                loss, g = loss_fn(C_hat[j], Ctr[i], Ztr[i], solver)
                losses.append(loss)
                G[j] = g
            # ReLU subgradient takes the 0 branch at exactly zero.
            G *= pre > 0
            W = opt.step(W, Xtr[idx].T @ G / idx.size)
        row.train_loss = float(np.mean(losses))
        log.append(row)
    train_time = time.perf_counter() - t_start
    _, best_epoch, best_val, W_best = best
    return TrainingResult(
        config=cfg, log=log, best_epoch=best_epoch, best_val_regret=float(best_val), W=W_best,
        W_final=W, train_time_s=train_time, val_overhead_s=overhead, val_calls=calls,
        test_cov_regret=validation_oracle_cov(Cte, Zte).value,
        test_decision_regret=decision_regret(Xte, Cte, Zte, W_best, solver),
    )


@dataclass(frozen=True)
class OracleTiming:
    oracle: str
    scenario_count: int | None
    mean_ms: float
    std_ms: float
    repetitions: int
    speedup: float | None = None

    def to_row(self) -> dict:
        return {"oracle": self.oracle,
                "scenario_count": "" if self.scenario_count is None else self.scenario_count,
                "latency_ms_mean": self.mean_ms, "latency_ms_std": self.std_ms,
                "speedup": "" if self.speedup is None else self.speedup}


def time_call(fn, repetitions: int, calls: int) -> tuple[float, float]:
    """Median over repetitions of the mean per-call latency (ms), and the std of those means.

    One warm-up call per repetition is excluded.
    """
    if repetitions < 2:
        raise ValueError("need at least 2 repetitions")
    means = []
    for _ in range(repetitions):
        fn()
        t0 = time.perf_counter()
        for _ in range(calls):
            fn()
        means.append((time.perf_counter() - t0) * 1e3 / calls)
    return float(statistics.median(means)), float(statistics.stdev(means))


def bench_oracles(scenario_counts=DEFAULT_SCENARIO_COUNTS, repetitions: int = 5, seed: int = 0,
                  data: SPODataset | None = None, calls: int = 20, cov_calls: int = 2000,
                  cov_per_count: bool = False) -> list[OracleTiming]:
    """Per-call latency of both validation oracles on the validation split.

    The covariance oracle is timed once (one row without ``scenario_count``)
    unless ``cov_per_count`` asks for one covariance row per scenario count
    as well, which is how its independence of the count is checked.
    """
    data = generate_spo_data(seed=seed) if data is None else data
    _, Cva, Zva = data.split("val")
    solver = data.grid

    def cov_call():
        return validation_oracle_cov(Cva, Zva)

    cov_mean, cov_std = time_call(cov_call, repetitions, cov_calls)
    out = [OracleTiming("cov", None, cov_mean, cov_std, repetitions)]
    for B in scenario_counts:
        if cov_per_count:
            m, s = time_call(cov_call, repetitions, cov_calls)
            out.append(OracleTiming("cov", int(B), m, s, repetitions))
        m, s = time_call(lambda: validation_oracle_saa(Cva, Zva, solver, B, seed), repetitions, calls)
        out.append(OracleTiming("saa", int(B), m, s, repetitions, speedup=m / cov_mean))
    return out


def write_timings(timings, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, ["oracle", "scenario_count", "latency_ms_mean", "latency_ms_std", "speedup"])
        w.writeheader()
        for t in timings:
            w.writerow(t.to_row())


def config_dict(cfg: SPOConfig) -> dict:
    return asdict(cfg)
