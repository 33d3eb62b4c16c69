"""Solver configuration, fit container and the clustering-regression objective."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "SolverConfig",
    "SilfsFit",
    "car_penalty",
    "objective",
    "assign_labels",
    "fitted_values",
]

DISTANCES = ("absolute", "squared")


@dataclass(frozen=True)
class SolverConfig:
    """Tuning parameters and stopping rules for both solvers.

    ``eps_outer``/``eps_inner`` are relative: the absolute tolerance is
    ``eps * (1 + |Z0|)`` with ``Z0`` the objective at the initial point.
    ``None`` selects the solver's own default (DC-ADMM: 1e-5 outer, 1e-4
    inner, caps 100/500; coordinate descent: 1e-6, 200 sweeps).
    """

    distance: str = "squared"
    lambda1: float = 1.0
    lambda2: float = 0.01
    rho1: float = 0.5
    rho2: float = 0.5
    rho3: float = 0.5
    eps_outer: float | None = None
    eps_inner: float | None = None
    max_outer: int | None = None
    max_inner: int | None = None
    lasso_tol: float = 1e-7
    lasso_max_iter: int = 10000

    def __post_init__(self):
        if self.distance not in DISTANCES:
            raise InvalidArgumentError(
                f"distance must be one of {DISTANCES}, got {self.distance!r}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidArgumentError("lambda1 and lambda2 must be nonnegative")
        if min(self.rho1, self.rho2, self.rho3) <= 0:
            raise InvalidArgumentError("augmentation parameters must be positive")
        for name in ("eps_outer", "eps_inner", "lasso_tol"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise InvalidArgumentError(f"{name} must be positive")
        for name in ("max_outer", "max_inner", "lasso_max_iter"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise InvalidArgumentError(f"{name} must be at least 1")

    def with_lambdas(self, lambda1, lambda2):
        return replace(self, lambda1=float(lambda1), lambda2=float(lambda2))

    def to_dict(self):
        return asdict(self)


@dataclass
class SilfsFit:
    """Result of one clustering-regression fit.

    ``labels`` are 1-based indices into the sorted ``gamma_hat``.
    ``objective_trace`` holds the objective at the initial point and after
    every accepted outer iteration (DC-ADMM) or sweep (coordinate descent).
    """

    alpha_hat: np.ndarray
    gamma_hat: np.ndarray
    theta_hat: np.ndarray
    beta_hat: np.ndarray
    labels: np.ndarray
    objective_trace: np.ndarray
    converged: bool
    outer_iters: int
    total_inner_iters: int = 0
    solver: str = ""
    config: SolverConfig | None = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def K(self) -> int:
        return self.gamma_hat.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta_hat != 0)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


def _distance(a, b, distance):
    d = a - b
    return np.abs(d) if distance == "absolute" else d * d


def car_penalty(alpha, gamma, distance="absolute") -> float:
    """``sum_i min_k d(alpha_i, gamma_k)`` with ``d`` absolute or squared."""
    if distance not in DISTANCES:
        raise InvalidArgumentError(f"unknown distance {distance!r}")
    alpha = np.asarray(alpha, dtype=float).ravel()
    gamma = np.asarray(gamma, dtype=float).ravel()
    if gamma.size < 1:
        raise InvalidArgumentError("need at least one centroid")
    return float(_distance(alpha[:, None], gamma[None, :], distance).min(axis=1).sum())


def assign_labels(alpha, gamma, distance="absolute") -> np.ndarray:
    """1-based nearest-centroid labels; ties go to the smallest index."""
    alpha = np.asarray(alpha, dtype=float).ravel()
    gamma = np.asarray(gamma, dtype=float).ravel()
    return np.argmin(_distance(alpha[:, None], gamma[None, :], distance), axis=1) + 1


def objective(response, factors, idiosyncratic, alpha, gamma, theta, beta,
              lambda1, lambda2, distance) -> float:
    """``(1/2n)||Y - alpha - F theta - U beta||^2 + lambda1 g + lambda2 ||beta||_1``."""
    resid = response - alpha - factors @ theta - idiosyncratic @ beta
    n = response.shape[0]
    return float(0.5 * resid @ resid / n
                 + lambda1 * car_penalty(alpha, gamma, distance)
                 + lambda2 * np.abs(beta).sum())


def fitted_values(fit: SilfsFit, decomposition) -> np.ndarray:
    """``gamma_{label_i} + f_i^T theta + u_i^T beta`` (centroid-based fit)."""
    return (fit.gamma_hat[fit.labels - 1]
            + decomposition.factors @ fit.theta_hat
            + decomposition.idiosyncratic @ fit.beta_hat)
