"""Numeric kernels shared by both solvers.

Soft-thresholding, cyclic coordinate-descent LASSO, globally optimal
one-dimensional K-means / K-median by dynamic programming, and the ridge
regression used to initialise the subject intercepts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceWarning, InvalidArgumentError

__all__ = [
    "soft_threshold",
    "lasso_cd",
    "lasso_objective",
    "UnivariateClustering",
    "cluster_1d",
    "RidgeInit",
    "ridge_init",
    "select_ridge_lambda",
    "DEFAULT_RIDGE_GRID",
]

DEFAULT_RIDGE_GRID = tuple(10.0 ** np.arange(-6, 3))


def soft_threshold(u, t):
    """``sgn(u) * max(|u| - t, 0)``, elementwise for arrays."""
    if np.any(np.asarray(t) < 0):
        raise InvalidArgumentError("threshold must be nonnegative")
    if np.ndim(u) == 0 and np.ndim(t) == 0:
        u = float(u)
        return float(np.sign(u) * max(abs(u) - t, 0.0))
    u = np.asarray(u, dtype=float)
    return np.sign(u) * np.maximum(np.abs(u) - t, 0.0)


# --------------------------------------------------------------------------
# LASSO
# --------------------------------------------------------------------------

@njit(cache=True)
def _lasso_sweeps(gram, corr, lam, beta, tol, max_iter):
    # grad[j] = corr[j] - (gram @ beta)[j]
    q = beta.shape[0]
    grad = corr - gram @ beta
    n_iter = 0
    converged = False
    while n_iter < max_iter:
        n_iter += 1
        max_change = 0.0
        for j in range(q):
            gjj = gram[j, j]
            if gjj <= 0.0:
                continue
            old = beta[j]
            z = grad[j] + gjj * old
            if z > lam:
                new = (z - lam) / gjj
            elif z < -lam:
                new = (z + lam) / gjj
            else:
                new = 0.0
            diff = new - old
            if diff != 0.0:
                beta[j] = new
                for k in range(q):
                    grad[k] -= gram[k, j] * diff
                if abs(diff) > max_change:
                    max_change = abs(diff)
        if max_change < tol:
            converged = True
            break
    return beta, n_iter, converged


def lasso_objective(design, target, beta, lam):
    """``(1/2n) ||target - design @ beta||^2 + lam * ||beta||_1``."""
    resid = target - design @ beta
    return 0.5 * resid @ resid / target.shape[0] + lam * np.abs(beta).sum()


def lasso_cd(design, target, lam, tol=1e-7, max_iter=10000, beta0=None,
             gram=None, full_output=False):
    """Minimise ``(1/2n)||target - design b||^2 + lam ||b||_1`` by cyclic CD.

    Parameters
    ----------
    design : ndarray, shape (n, q)
        Columns are used unstandardised.
    target : ndarray, shape (n,)
    lam : float
        Nonnegative penalty level.
    tol : float
        Sweeps stop once the largest coordinate change is below ``tol``.
    max_iter : int
        Cap on the number of full sweeps.
    beta0 : ndarray, optional
        Warm start; the objective never increases from it.
    gram : ndarray, shape (q, q), optional
        Precomputed ``design.T @ design / n`` (reused across calls by the
        coordinate-descent solver).
    full_output : bool
        Also return the number of sweeps and the convergence flag.

    Returns
    -------
    beta : ndarray, shape (q,)
    n_iter, converged : int, bool
        Only when ``full_output`` is true.  A ``ConvergenceWarning`` is issued
        whenever the sweep cap is hit.
    """
    design = np.asarray(design, dtype=float)
    target = np.asarray(target, dtype=float)
    if design.ndim != 2 or target.ndim != 1 or design.shape[0] != target.shape[0]:
        raise InvalidArgumentError(
            f"design {design.shape} and target {target.shape} do not agree")
    if lam < 0:
        raise InvalidArgumentError("lambda must be nonnegative")
    n, q = design.shape
    if gram is None:
        gram = design.T @ design / n
    corr = design.T @ target / n
    beta = np.zeros(q) if beta0 is None else np.array(beta0, dtype=float)
    if q == 0:
        return (beta, 0, True) if full_output else beta
    beta, n_iter, converged = _lasso_sweeps(
        np.ascontiguousarray(gram), corr, float(lam), beta, float(tol), int(max_iter))
    if not converged:
        warnings.warn(f"lasso_cd hit max_iter={max_iter} without reaching "
                      f"tol={tol}", ConvergenceWarning, stacklevel=2)
    if full_output:
        return beta, n_iter, converged
    return beta


# --------------------------------------------------------------------------
# One-dimensional clustering
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class UnivariateClustering:
    """Optimal 1-D partition: sorted ``centroids``, 1-based ``labels``."""

    centroids: np.ndarray
    labels: np.ndarray
    within_cost: float


@njit(cache=True)
def _segment_cost(xs, s1, s2, i, j, squared):
    """Within cost of the sorted segment ``xs[i..j]`` from prefix sums."""
    m = j - i + 1
    seg = s1[j + 1] - s1[i]
    if squared:
        return max(s2[j + 1] - s2[i] - seg * seg / m, 0.0)
    lo = (i + j) // 2
    med = xs[lo]
    upper = s1[j + 1] - s1[lo + 1] - (j - lo) * med
    lower = (lo - i + 1) * med - (s1[lo + 1] - s1[i])
    return max(upper + lower, 0.0)


@njit(cache=True)
def _partition_dp(xs, K, squared):
    """Exact DP over segment boundaries.

    The optimal start of the last segment is monotone in its end point, so
    each layer is filled by divide and conquer in O(n log n).  Ties keep
    the smallest start index.
    """
    n = xs.size
    s1 = np.zeros(n + 1)
    s2 = np.zeros(n + 1)
    for t in range(n):
        s1[t + 1] = s1[t] + xs[t]
        s2[t + 1] = s2[t] + xs[t] * xs[t]
    best = np.full((K, n), np.inf)
    start = np.zeros((K, n), dtype=np.int64)
    for j in range(n):
        best[0, j] = _segment_cost(xs, s1, s2, 0, j, squared)
    stack = np.empty((4 * (n + 2), 4), dtype=np.int64)
    for k in range(1, K):
        # task: fill end points lo..hi knowing the start lies in [olo, ohi]
        top = 0
        stack[0, 0], stack[0, 1], stack[0, 2], stack[0, 3] = k, n - 1, k, n - 1
        top = 1
        while top > 0:
            top -= 1
            lo, hi, olo, ohi = stack[top, 0], stack[top, 1], stack[top, 2], stack[top, 3]
            if lo > hi:
                continue
            mid = (lo + hi) // 2
            arg = -1
            val = np.inf
            for i in range(max(olo, k), min(mid, ohi) + 1):
                c = best[k - 1, i - 1] + _segment_cost(xs, s1, s2, i, mid, squared)
                if c < val:
                    val = c
                    arg = i
            if arg < 0:
                arg = max(olo, k)
            best[k, mid] = val
            start[k, mid] = arg
            stack[top, 0], stack[top, 1], stack[top, 2], stack[top, 3] = lo, mid - 1, olo, arg
            top += 1
            stack[top, 0], stack[top, 1], stack[top, 2], stack[top, 3] = mid + 1, hi, arg, ohi
            top += 1
    return best, start


def cluster_1d(values, K: int, distance: str = "squared") -> UnivariateClustering:
    """Globally optimal K-means (``squared``) or K-median (``absolute``) in 1-D.

    Optimal clusters are contiguous in sorted order, so dynamic programming
    over segment boundaries gives the exact optimum, in O(K n log n) time
    with the monotone split-point speed-up.  Segment centres are means, or
    medians (midpoint of the two middle order statistics for even lengths).
    """
    if distance not in ("squared", "absolute"):
        raise InvalidArgumentError(f"unknown distance {distance!r}")
    x = np.asarray(values, dtype=float).ravel()
    n_distinct = np.unique(x).size
    if not (isinstance(K, (int, np.integer)) and 1 <= K <= n_distinct):
        raise InvalidArgumentError(
            f"K={K} must lie in [1, number of distinct values={n_distinct}]")
    order = np.argsort(x, kind="stable")
    xs = np.ascontiguousarray(x[order])
    n = xs.size
    best, start = _partition_dp(xs, int(K), distance == "squared")

    bounds = []
    j = n - 1
    for k in range(K - 1, -1, -1):
        i = int(start[k, j]) if k > 0 else 0
        bounds.append((i, j))
        j = i - 1
    bounds.reverse()

    if distance == "squared":
        centroids = np.array([xs[i:j + 1].mean() for i, j in bounds])
    else:
        centroids = np.array([0.5 * (xs[(i + j) // 2] + xs[(i + j + 1) // 2]) for i, j in bounds])
    sorted_labels = np.empty(n, dtype=np.int64)
    for k, (i, j) in enumerate(bounds):
        sorted_labels[i:j + 1] = k + 1
    labels = np.empty(n, dtype=np.int64)
    labels[order] = sorted_labels
    return UnivariateClustering(centroids=centroids, labels=labels,
                                within_cost=float(best[K - 1, n - 1]))


# --------------------------------------------------------------------------
# Ridge initialisation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RidgeInit:
    alpha0: np.ndarray
    theta0: np.ndarray
    lambda_star: float


def ridge_init(response, factors, lambda_star: float) -> RidgeInit:
    """Ridge fit of the response on the pseudo-design ``(F, I_n)``.

    Minimises ``(1/2n)||Y - F theta - alpha||^2 + lambda*(||theta||^2 +
    ||alpha||^2)``.  The solution is ``(theta, alpha) = X*^T z`` with
    ``(F F^T + c I) z = Y``, ``c = 1 + 2 n lambda*``; by the Woodbury
    identity ``theta = (F^T F + c I)^{-1} F^T Y`` and ``z = (Y - F theta) / c``,
    so only an r x r system is solved.
    """
    if not lambda_star > 0:
        raise InvalidArgumentError("lambda_star must be positive")
    y = np.asarray(response, dtype=float)
    F = np.asarray(factors, dtype=float).reshape(y.shape[0], -1)
    n = y.shape[0]
    shift = 1.0 + 2.0 * n * lambda_star
    if F.shape[1] == 0:
        z = y / shift
    else:
        G = F.T @ F
        G[np.diag_indices_from(G)] += shift
        theta = np.linalg.solve(G, F.T @ y)
        z = (y - F @ theta) / shift
    return RidgeInit(alpha0=z, theta0=F.T @ z, lambda_star=float(lambda_star))


CV_TIE_RTOL = 3e-3


def select_ridge_lambda(response, factors, grid=DEFAULT_RIDGE_GRID,
                        folds: int = 5, rtol: float = CV_TIE_RTOL) -> float:
    """Pick ``lambda*`` by K-fold cross-validation over contiguous folds.

    Held-out subjects have no fitted intercept, so the held-out prediction
    is ``F_test theta``.  Errors within a relative ``rtol`` of the minimum
    count as ties and the smallest tied grid value wins.  For small
    ``lambda*`` the held-out error barely moves while the intercepts shrink
    by ``1 / (1 + 2 n lambda*)``, so the least-shrunk choice is preferred.
    """
    y = np.asarray(response, dtype=float)
    F = np.asarray(factors, dtype=float).reshape(y.shape[0], -1)
    grid = np.asarray(grid, dtype=float).ravel()
    n = y.shape[0]
    if grid.size == 0:
        raise InvalidArgumentError("ridge grid is empty")
    if np.any(grid <= 0):
        raise InvalidArgumentError("ridge grid values must be positive")
    if folds < 2 or n < folds:
        raise InvalidArgumentError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    if grid.size == 1:
        return float(grid[0])
    edges = np.linspace(0, n, folds + 1).astype(int)
    errors = np.zeros(grid.size)
    for a, b in zip(edges[:-1], edges[1:]):
        test = np.zeros(n, dtype=bool)
        test[a:b] = True
        for g, lam in enumerate(grid):
            fit = ridge_init(y[~test], F[~test], lam)
            pred = F[test] @ fit.theta0
            errors[g] += np.sum((y[test] - pred) ** 2)
    errors /= n
    best = np.flatnonzero(errors <= errors.min() * (1.0 + rtol))
    return float(np.min(grid[best]))
