"""Evaluation metrics for subgroup recovery and variable selection."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "NONZERO_THRESHOLD",
    "rand_index",
    "rmse_metrics",
    "selection_metrics",
    "SelectionScore",
    "MetricsReport",
]

NONZERO_THRESHOLD = 1e-10


def rand_index(labels_a, labels_b) -> float:
    """Fraction of subject pairs on which two partitions agree.

    A pair agrees when both partitions put it in the same group or both
    put it in different groups.  Label values themselves are irrelevant.
    """
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.size != b.size:
        raise InvalidArgumentError(f"label vectors differ in length: {a.size} vs {b.size}")
    n = a.size
    if n < 2:
        raise InvalidArgumentError("rand index needs at least two subjects")
    # pair counts from the contingency table
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    pairs = lambda c: int(np.sum(c * (c - 1) // 2))
    both = pairs(table)
    same_a = pairs(table.sum(axis=1))
    same_b = pairs(table.sum(axis=0))
    total = n * (n - 1) // 2
    agree = total + 2 * both - same_a - same_b
    return agree / total


def rmse_metrics(fits, truths) -> tuple[float, float]:
    """``(RMSE_alpha, RMSE_beta)`` pooled over replications.

    ``RMSE_beta = sqrt(sum_i ||beta_hat_i - beta||^2 / (N p))`` and
    ``RMSE_alpha`` likewise with ``n``.
    """
    fits, truths = list(fits), list(truths)
    if len(fits) != len(truths):
        raise InvalidArgumentError("fits and truths must be aligned")
    if not fits:
        raise InvalidArgumentError("need at least one replication")
    sa = sb = 0.0
    na = nb = 0
    for fit, truth in zip(fits, truths):
        da = np.asarray(fit.alpha_hat) - np.asarray(truth.true_alpha)
        db = np.asarray(fit.beta_hat) - np.asarray(truth.true_beta)
        sa += float(da @ da)
        sb += float(db @ db)
        na += da.size
        nb += db.size
    return float(np.sqrt(sa / na)), float(np.sqrt(sb / nb))


@dataclass(frozen=True)
class SelectionScore:
    """Sensitivity and specificity of an estimated support.

    ``degenerate`` is set when the truth has no zero or no nonzero entry;
    the undefined ratio is then reported as 1.0.
    """

    sensitivity: float
    specificity: float
    degenerate: bool = False

    def __iter__(self):
        return iter((self.sensitivity, self.specificity))


def selection_metrics(beta_hat, beta_true, threshold=NONZERO_THRESHOLD) -> SelectionScore:
    """Share of true nonzeros recovered and share of true zeros kept at zero."""
    est = np.abs(np.asarray(beta_hat, dtype=float).ravel()) > threshold
    tru = np.abs(np.asarray(beta_true, dtype=float).ravel()) > threshold
    if est.size != tru.size:
        raise InvalidArgumentError("coefficient vectors differ in length")
    n_pos, n_neg = int(tru.sum()), int((~tru).sum())
    degenerate = n_pos == 0 or n_neg == 0
    sens = float((est & tru).sum() / n_pos) if n_pos else 1.0
    spec = float((~est & ~tru).sum() / n_neg) if n_neg else 1.0
    return SelectionScore(sens, spec, degenerate)


@dataclass
class MetricsReport:
    """Aggregated benchmark metrics for one method.

    ``over_freq``/``under_freq`` count replications where the selected
    number of groups exceeded/fell short of the truth; ``freq`` renders them
    as ``"over|under"``.
    """

    method: str
    reps: int
    rmse_alpha: float
    rmse_beta: float
    rand_index: float
    sensitivity: float
    specificity: float
    k_hat_mean: float
    over_freq: int
    under_freq: int
    wall_time_ms: float
    failures: int = 0

    @property
    def freq(self) -> str:
        return f"{self.over_freq}|{self.under_freq}"

    def to_dict(self):
        out = asdict(self)
        out["freq"] = self.freq
        return out
