"""End-to-end helpers: factor step, ridge initialisation and solver dispatch."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .admm import fit_dc_admm
from .ccd import fit_ccd
from .errors import InvalidArgumentError
from .factor_model import (Dataset, FactorDecomposition, estimate_factors,
                           no_factors, select_num_factors)
from .numerics import (DEFAULT_RIDGE_GRID, RidgeInit, cluster_1d, ridge_init,
                       select_ridge_lambda)
from .objective import SilfsFit, SolverConfig

__all__ = ["SOLVERS", "Prepared", "prepare", "factor_step", "initial_centroids",
           "fit_solver"]

SOLVERS = {
    "l2-ccd": ("squared", fit_ccd),
    "l1-admm": ("absolute", fit_dc_admm),
}


def _solver(name):
    try:
        return SOLVERS[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None


def factor_step(data: Dataset, r="auto", r_star=None, c_np=0.0) -> FactorDecomposition:
    """Estimate the factor decomposition.

    ``r`` is a positive integer, ``"auto"`` for the eigenvalue-ratio choice,
    or ``0`` to skip the factor step (S-CAR).
    """
    if r == "auto":
        r = select_num_factors(data, r_star=r_star, c_np=c_np)
    r = int(r)
    if r == 0:
        return no_factors(data)
    return estimate_factors(data, r)


@dataclass(frozen=True)
class Prepared:
    """Quantities shared by every fit on one dataset."""

    data: Dataset
    decomposition: FactorDecomposition
    ridge: RidgeInit

    @property
    def alpha0(self):
        return self.ridge.alpha0


def prepare(data: Dataset, r="auto", lambda_star=None,
            ridge_grid=DEFAULT_RIDGE_GRID, folds=5, decomposition=None) -> Prepared:
    """Factor step plus ridge initialisation of the intercepts.

    ``lambda_star`` defaults to the cross-validated choice over
    ``ridge_grid``.
    """
    if decomposition is None:
        decomposition = factor_step(data, r)
    F = decomposition.factors
    if lambda_star is None:
        lambda_star = select_ridge_lambda(data.response, F, ridge_grid, folds)
    return Prepared(data, decomposition, ridge_init(data.response, F, lambda_star))


def initial_centroids(alpha0, K, distance="squared"):
    """Sorted K-means (squared) or K-median (absolute) centroids of ``alpha0``."""
    return cluster_1d(alpha0, K, distance).centroids


def fit_solver(prepared: Prepared, K: int, config: SolverConfig,
               solver="l2-ccd", init=None) -> SilfsFit:
    """Run one solver from the ridge/clustering initial point."""
    distance, fit = _solver(solver)
    if init is None:
        alpha0 = prepared.alpha0
        init = (alpha0, initial_centroids(alpha0, K, distance))
    if config.distance != distance:
        config = type(config)(**{**config.to_dict(), "distance": distance})
    return fit(prepared.data, prepared.decomposition, K, config, init)


def residual_scale(prepared: Prepared) -> float:
    """``||U^T (Y - mean(Y))||_inf / n``, the smallest LASSO level giving 0."""
    y = prepared.data.response
    U = prepared.decomposition.idiosyncratic
    return float(np.max(np.abs(U.T @ (y - y.mean()))) / y.size)
