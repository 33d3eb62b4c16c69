"""Cyclic coordinate descent for the clustering regression, squared distance.

One sweep updates, in order: the factor coefficients (closed form, using
``F^T U = 0``), the sparse coefficients (LASSO on ``U``), the intercepts
(minimiser of the DC surrogate of the CAR penalty) and the centroids
(exact 1-D K-means).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError, NumericalFailureError
from .numerics import cluster_1d, lasso_cd
from .objective import SilfsFit, SolverConfig, assign_labels, objective

__all__ = [
    "ccd_update_theta",
    "ccd_update_beta",
    "ccd_update_alpha",
    "ccd_update_gamma",
    "g2_gradient_squared",
    "fit_ccd",
]


def ccd_update_theta(response, alpha, decomposition):
    """``F^T (Y - alpha) / n``."""
    F = decomposition.factors
    return F.T @ (np.asarray(response) - np.asarray(alpha)) / F.shape[0]


def ccd_update_beta(response, alpha, theta, decomposition, lambda2,
                    tol=1e-7, max_iter=10000, beta0=None, gram=None):
    """LASSO of ``Y - alpha - F theta`` on the idiosyncratic design."""
    target = response - alpha - decomposition.factors @ theta
    return lasso_cd(decomposition.idiosyncratic, target, lambda2, tol=tol,
                    max_iter=max_iter, beta0=beta0, gram=gram)


def g2_gradient_squared(alpha, gamma):
    """Gradient in ``alpha`` of ``sum_i sum_{k>=2} max((a_i-g_{k-1})^2, (a_i-g_k)^2)``.

    Per subject this is ``2 sum_k max(|a - g_{k-1}|, |a - g_k|) *
    sgn(a - (g_{k-1} + g_k) / 2)``; at an exact midpoint the sign is zero.
    """
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.size < 2:
        return np.zeros_like(alpha)
    lo, hi = gamma[:-1][None, :], gamma[1:][None, :]
    a = alpha[:, None]
    far = np.maximum(np.abs(a - lo), np.abs(a - hi))
    return 2.0 * np.sum(far * np.sign(a - 0.5 * (lo + hi)), axis=1)


def ccd_update_alpha(response, theta, beta, gamma, alpha_prev, decomposition,
                     lambda1):
    """Closed-form minimiser of the linearised surrogate in ``alpha``.

    ``n / (1 + 2 lambda1 K n) * [(Y - F theta - U beta) / n
    + 2 lambda1 sum(gamma) + lambda1 grad_g2(alpha_prev, gamma)]``
    """
    gamma = np.asarray(gamma, dtype=float)
    n, K = response.shape[0], gamma.size
    resid = response - decomposition.factors @ theta - decomposition.idiosyncratic @ beta
    grad = g2_gradient_squared(alpha_prev, gamma)
    scale = n / (1.0 + 2.0 * lambda1 * K * n)
    return scale * (resid / n + 2.0 * lambda1 * gamma.sum() + lambda1 * grad)


def ccd_update_gamma(alpha, K):
    """Sorted optimal K-means centroids of ``alpha``.

    With fewer than K distinct intercepts the distinct values are kept and
    the largest is repeated, so the centroid vector keeps length K.
    """
    alpha = np.asarray(alpha, dtype=float)
    distinct = np.unique(alpha).size
    if distinct >= K:
        return cluster_1d(alpha, K, "squared").centroids
    centroids = cluster_1d(alpha, distinct, "squared").centroids
    return np.concatenate([centroids, np.repeat(centroids[-1], K - distinct)])


def fit_ccd(data, decomposition, K: int, config: SolverConfig, init) -> SilfsFit:
    """Minimise the clustering-regression objective with the squared distance.

    Parameters
    ----------
    data : Dataset
    decomposition : FactorDecomposition
    K : int
    config : SolverConfig
        ``eps_outer`` (default 1e-6, relative) and ``max_outer`` (default
        200 sweeps) control termination.
    init : tuple (alpha0, gamma0)

    Returns
    -------
    SilfsFit
        ``objective_trace`` starts at the initial point and has one entry
        per sweep.
    """
    alpha, gamma = (np.asarray(v, dtype=float).copy() for v in init)
    if K < 1 or gamma.size != K:
        raise InvalidArgumentError(f"need {K} initial centroids, got {gamma.size}")
    gamma = np.sort(gamma)
    y = data.response
    F, U = decomposition.factors, decomposition.idiosyncratic
    n, p = U.shape
    lam1, lam2 = config.lambda1, config.lambda2
    eps = 1e-6 if config.eps_outer is None else config.eps_outer
    max_sweeps = 200 if config.max_outer is None else config.max_outer
    gram = U.T @ U / n

    theta = ccd_update_theta(y, alpha, decomposition)
    beta = np.zeros(p)

    def Z(alpha, gamma, theta, beta):
        return objective(y, F, U, alpha, gamma, theta, beta, lam1, lam2, "squared")

    z_prev = Z(alpha, gamma, theta, beta)
    if not np.isfinite(z_prev):
        raise NumericalFailureError("objective is not finite at the initial point")
    tol = eps * (1.0 + abs(z_prev))
    trace = [z_prev]
    converged = False
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        theta = ccd_update_theta(y, alpha, decomposition)
        beta = ccd_update_beta(y, alpha, theta, decomposition, lam2,
                               tol=config.lasso_tol, max_iter=config.lasso_max_iter,
                               beta0=beta, gram=gram)
        alpha = ccd_update_alpha(y, theta, beta, gamma, alpha, decomposition, lam1)
        gamma = ccd_update_gamma(alpha, K)
        z = Z(alpha, gamma, theta, beta)
        if not np.isfinite(z):
            raise NumericalFailureError(f"objective became non-finite at sweep {sweeps}")
        trace.append(z)
        if abs(z - z_prev) <= tol:
            converged = True
            break
        z_prev = z

    return SilfsFit(alpha_hat=alpha, gamma_hat=gamma, theta_hat=theta,
                    beta_hat=beta, labels=assign_labels(alpha, gamma, "squared"),
                    objective_trace=np.asarray(trace), converged=converged,
                    outer_iters=sweeps, solver="l2-ccd", config=config)
