"""Choice of the number of groups (BIC) and of the penalty levels (GCV)."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SelectionFailureError, SilfsError
from .objective import SilfsFit, SolverConfig, fitted_values
from .pipeline import Prepared, fit_solver, residual_scale

__all__ = [
    "RSS_FLOOR",
    "PROBE_LAMBDA1",
    "PROBE_LAMBDA2_FRACTION",
    "default_lambda1_grid",
    "default_lambda2_grid",
    "bic",
    "gcv",
    "SelectionReport",
    "select_k",
    "select_lambdas",
    "select_model",
]

RSS_FLOOR = 1e-12
PROBE_LAMBDA1 = 1.0
PROBE_LAMBDA2_FRACTION = 0.01


def default_lambda1_grid() -> np.ndarray:
    return np.logspace(-3, 1, 7)


def default_lambda2_grid(lambda_max: float) -> np.ndarray:
    return lambda_max * np.logspace(-3, 0, 7)


def _rss(fit, data, decomposition):
    r = data.response - fitted_values(fit, decomposition)
    return float(r @ r)


def bic(fit: SilfsFit, data, decomposition) -> float:
    """``log(RSS/n) + a_n (S + K) log(n) / n`` with ``a_n = 2 log(nK + p)``.

    The fitted values use the centroid of each subject's group.  RSS is
    floored at ``RSS_FLOOR`` so that exact fits stay finite.
    """
    n, p = data.n, data.p
    K = fit.K
    s = int(np.count_nonzero(fit.beta_hat))
    rss = max(_rss(fit, data, decomposition), RSS_FLOOR)
    a_n = 2.0 * np.log(n * K + p)
    return float(np.log(rss / n) + a_n * (s + K) * np.log(n) / n)


def gcv(fit: SilfsFit, data, decomposition) -> float:
    """``RSS / (n - df)^2`` with ``df`` the number of nonzero coefficients."""
    n = data.n
    df = int(np.count_nonzero(fit.beta_hat))
    if df >= n:
        raise InvalidArgumentError(f"degrees of freedom {df} reach the sample size {n}")
    return _rss(fit, data, decomposition) / (n - df) ** 2


@dataclass
class SelectionReport:
    """Outcome of the two-stage search.

    ``bic_values`` and ``gcv_values`` are ``inf`` where a fit failed; the
    failure messages are kept in ``failures`` keyed by grid position.
    """

    solver: str
    k_grid: list
    bic_values: list
    k_hat: int
    lambda_grid: list = field(default_factory=list)
    gcv_values: list = field(default_factory=list)
    lambda1_hat: float = float("nan")
    lambda2_hat: float = float("nan")
    probe: tuple = ()
    failures: dict = field(default_factory=dict)
    fit: SilfsFit | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "solver": self.solver,
            "probe": {"lambda1": self.probe[0], "lambda2": self.probe[1]} if self.probe else None,
            "k_grid": [int(k) for k in self.k_grid],
            "bic_values": [float(v) for v in self.bic_values],
            "k_hat": int(self.k_hat),
            "lambda_grid": [[float(a), float(b)] for a, b in self.lambda_grid],
            "gcv_values": [float(v) for v in self.gcv_values],
            "lambda1_hat": float(self.lambda1_hat),
            "lambda2_hat": float(self.lambda2_hat),
            "failures": {str(k): v for k, v in self.failures.items()},
        }


def _run_grid(task, items, workers):
    """Evaluate ``task`` on every item; results keep the item order."""
    if workers is None or workers <= 1 or len(items) <= 1:
        return [task(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, items))


def _guarded(fn):
    def run(x):
        try:
            return fn(x), None
        except (SilfsError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            return None, f"{type(exc).__name__}: {exc}"
    return run


def select_k(prepared: Prepared, k_grid, probe_config: SolverConfig | None = None,
             solver="l2-ccd", workers=1) -> SelectionReport:
    """Fit every ``K`` at a probe penalty pair and keep the BIC minimiser.

    The default probe is a large ``lambda1 = PROBE_LAMBDA1`` and a small
    ``lambda2 = PROBE_LAMBDA2_FRACTION * lambda_max``.  Ties go to the
    smallest ``K``.
    """
    ks = sorted({int(k) for k in k_grid})
    if not ks or ks[0] < 1:
        raise InvalidArgumentError("k_grid must be nonempty with values >= 1")
    if probe_config is None:
        probe_config = SolverConfig(lambda1=PROBE_LAMBDA1,
                                    lambda2=PROBE_LAMBDA2_FRACTION * residual_scale(prepared))
    data, dec = prepared.data, prepared.decomposition

    def one(K):
        fit = fit_solver(prepared, K, probe_config, solver)
        return bic(fit, data, dec)

    results = _run_grid(_guarded(one), ks, workers)
    values = [np.inf if v is None else v for v, _ in results]
    failures = {k: msg for k, (_, msg) in zip(ks, results) if msg is not None}
    if len(failures) == len(ks):
        raise SelectionFailureError(f"every fit failed during K selection: {failures}")
    k_hat = ks[int(np.argmin(values))]
    return SelectionReport(solver=solver, k_grid=ks, bic_values=values, k_hat=k_hat,
                           probe=(probe_config.lambda1, probe_config.lambda2),
                           failures={f"K={k}": m for k, m in failures.items()})


def select_lambdas(prepared: Prepared, k_hat: int, lambda1_grid=None, lambda2_grid=None,
                   config: SolverConfig | None = None, solver="l2-ccd", workers=1):
    """Full grid search over ``(lambda1, lambda2)`` minimising GCV.

    Ties go to the larger ``lambda2`` and then the larger ``lambda1``.

    Returns
    -------
    pairs : list of (lambda1, lambda2)
    values : list of float
        GCV per pair, ``inf`` for failed fits.
    best : int
        Index of the selected pair.
    fit : SilfsFit
        Fit at the selected pair.
    failures : dict
    """
    l1 = default_lambda1_grid() if lambda1_grid is None else np.asarray(lambda1_grid, float).ravel()
    l2 = (default_lambda2_grid(residual_scale(prepared)) if lambda2_grid is None
          else np.asarray(lambda2_grid, float).ravel())
    if l1.size == 0 or l2.size == 0:
        raise InvalidArgumentError("lambda grids must be nonempty")
    config = config or SolverConfig()
    pairs = [(float(a), float(b)) for a in l1 for b in l2]
    data, dec = prepared.data, prepared.decomposition

    def one(pair):
        fit = fit_solver(prepared, k_hat, config.with_lambdas(*pair), solver)
        return gcv(fit, data, dec), fit

    results = _run_grid(_guarded(one), pairs, workers)
    values = [np.inf if v is None else v[0] for v, _ in results]
    failures = {f"lambda={pairs[i]}": m for i, (_, m) in enumerate(results) if m is not None}
    if len(failures) == len(pairs):
        raise SelectionFailureError(f"every fit failed during penalty selection: {failures}")
    vals = np.asarray(values)
    tied = np.flatnonzero(vals == vals.min())
    best = max(tied, key=lambda i: (pairs[i][1], pairs[i][0]))
    return pairs, values, int(best), results[best][0][1], failures


def select_model(prepared: Prepared, k_grid, lambda1_grid=None, lambda2_grid=None,
                 solver="l2-ccd", probe_config=None, config=None, workers=1) -> SelectionReport:
    """Select ``K`` by BIC at the probe, then ``(lambda1, lambda2)`` by GCV."""
    report = select_k(prepared, k_grid, probe_config, solver, workers)
    pairs, values, best, fit, failures = select_lambdas(
        prepared, report.k_hat, lambda1_grid, lambda2_grid, config, solver, workers)
    report.lambda_grid = pairs
    report.gcv_values = values
    report.lambda1_hat, report.lambda2_hat = pairs[best]
    report.failures.update(failures)
    report.fit = fit
    return report
