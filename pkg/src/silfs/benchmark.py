"""Multi-replication benchmarks comparing SILFS variants and the S-CAR baseline."""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SilfsError
from .metrics import MetricsReport, rand_index, rmse_metrics, selection_metrics
from .objective import SolverConfig
from .pipeline import prepare
from .selection import select_model
from .simulation import generate

__all__ = [
    "METHODS",
    "ScenarioSpec",
    "ReplicationResult",
    "BenchmarkResult",
    "worker_count",
    "run_replication",
    "run_benchmark",
]

# method name -> (solver, uses factor step)
METHODS = {
    "SILFS-l1": ("l1-admm", True),
    "SILFS-l2": ("l2-ccd", True),
    "S-CAR": ("l2-ccd", False),
}


@dataclass(frozen=True)
class ScenarioSpec:
    """A data generator (``A``, ``B``, ``collinearity`` or ``toy``) and its parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def draw(self, seed):
        return generate(self.kind, seed, **self.params)

    def to_dict(self):
        return {"kind": self.kind, "params": dict(self.params)}


@dataclass
class ReplicationResult:
    """Outcome of one method on one replication; ``error`` is set on failure."""

    method: str
    seed: int
    k_true: int
    k_hat: int = 0
    rand_index: float = float("nan")
    sensitivity: float = float("nan")
    specificity: float = float("nan")
    sq_err_alpha: float = float("nan")
    sq_err_beta: float = float("nan")
    n: int = 0
    p: int = 0
    r: int = 0
    lambda1: float = float("nan")
    lambda2: float = float("nan")
    wall_time_ms: float = 0.0
    error: str | None = None

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class BenchmarkResult:
    scenario: ScenarioSpec
    seed0: int
    reps: int
    reports: dict
    replications: list

    def rows(self):
        return [self.reports[m] for m in self.reports]


def worker_count(default: int = 1) -> int:
    """Worker cap from ``SILFS_THREADS`` (at least one)."""
    raw = os.environ.get("SILFS_THREADS")
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"SILFS_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise InvalidArgumentError("SILFS_THREADS must be at least 1")
    return value


def run_replication(scenario: ScenarioSpec, seed: int, methods, k_grid, r="auto",
                    config: SolverConfig | None = None, lambda1_grid=None,
                    lambda2_grid=None) -> list[ReplicationResult]:
    """Draw one dataset and run every method on it."""
    truth = scenario.draw(seed)
    out = []
    for method in methods:
        solver, factored = METHODS[method]
        res = ReplicationResult(method=method, seed=seed, k_true=truth.K,
                                n=truth.dataset.n, p=truth.dataset.p)
        t0 = time.perf_counter()
        try:
            prepared = prepare(truth.dataset, r=r if factored else 0)
            report = select_model(prepared, k_grid, lambda1_grid, lambda2_grid,
                                  solver=solver, config=config)
            fit = report.fit
            score = selection_metrics(fit.beta_hat, truth.true_beta)
            da = fit.alpha_hat - truth.true_alpha
            db = fit.beta_hat - truth.true_beta
            res.k_hat = report.k_hat
            res.rand_index = rand_index(fit.labels, truth.true_labels)
            res.sensitivity, res.specificity = score
            res.sq_err_alpha = float(da @ da)
            res.sq_err_beta = float(db @ db)
            res.r = prepared.decomposition.num_factors
            res.lambda1, res.lambda2 = report.lambda1_hat, report.lambda2_hat
        except (SilfsError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            res.error = f"{type(exc).__name__}: {exc}"
        res.wall_time_ms = 1e3 * (time.perf_counter() - t0)
        out.append(res)
    return out


def _aggregate(method, results) -> MetricsReport:
    ok = [r for r in results if r.error is None]
    fails = len(results) - len(ok)
    if not ok:
        nan = float("nan")
        return MetricsReport(method, len(results), nan, nan, nan, nan, nan, nan, 0, 0,
                             float(np.mean([r.wall_time_ms for r in results])), fails)
    rmse_a = float(np.sqrt(sum(r.sq_err_alpha for r in ok) / sum(r.n for r in ok)))
    rmse_b = float(np.sqrt(sum(r.sq_err_beta for r in ok) / sum(r.p for r in ok)))
    return MetricsReport(
        method=method, reps=len(results), rmse_alpha=rmse_a, rmse_beta=rmse_b,
        rand_index=float(np.mean([r.rand_index for r in ok])),
        sensitivity=float(np.mean([r.sensitivity for r in ok])),
        specificity=float(np.mean([r.specificity for r in ok])),
        k_hat_mean=float(np.mean([r.k_hat for r in ok])),
        over_freq=sum(r.k_hat > r.k_true for r in ok),
        under_freq=sum(r.k_hat < r.k_true for r in ok),
        wall_time_ms=float(np.mean([r.wall_time_ms for r in ok])),
        failures=fails)


def run_benchmark(scenario: ScenarioSpec, reps: int, methods=("SILFS-l2",), seed0: int = 0,
                  k_grid=range(1, 6), r="auto", config: SolverConfig | None = None,
                  lambda1_grid=None, lambda2_grid=None, workers=None) -> BenchmarkResult:
    """Run ``reps`` replications (seeds ``seed0 .. seed0 + reps - 1``).

    A failing replication is recorded with its error message and excluded
    from the averages; it never aborts the run.  ``workers`` defaults to
    ``SILFS_THREADS``; results are merged in replication order.
    """
    if reps < 1:
        raise InvalidArgumentError("reps must be at least 1")
    methods = list(methods)
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise InvalidArgumentError(f"unknown methods {unknown}; choose from {sorted(METHODS)}")
    k_grid = sorted({int(k) for k in k_grid})
    workers = worker_count() if workers is None else int(workers)
    seeds = [seed0 + i for i in range(reps)]
    args = [(scenario, s, methods, k_grid, r, config, lambda1_grid, lambda2_grid)
            for s in seeds]
    if workers > 1 and reps > 1:
        with ProcessPoolExecutor(max_workers=min(workers, reps)) as pool:
            per_rep = list(pool.map(_replicate, args))
    else:
        per_rep = [_replicate(a) for a in args]
    flat = [res for rep in per_rep for res in rep]
    reports = {m: _aggregate(m, [x for x in flat if x.method == m]) for m in methods}
    return BenchmarkResult(scenario, seed0, reps, reports, flat)


def _replicate(args):
    return run_replication(*args)
