"""Synthetic data generators for the subgroup-regression experiments.

All randomness comes from :class:`SeededStream`: a PCG64 bit generator
seeded with one integer, uniforms on the open interval (0, 1) built from 53
random bits, and normal variates by inversion of the standard normal CDF.
Replication ``i`` of a benchmark uses seed ``seed0 + i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import InvalidArgumentError
from .factor_model import Dataset

__all__ = [
    "SeededStream",
    "SyntheticDataset",
    "ar1_coefficients",
    "generate_scenario_ab",
    "collinearity_covariance",
    "generate_collinearity_case",
    "generate_toy",
    "generate",
]

AR1_BURN_IN = 50
STATIONARY_RADIUS = 0.9


class SeededStream:
    """Reproducible source of uniform and normal variates."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low=0.0, high=1.0, size=None):
        bits = self._gen.integers(0, 2 ** 53, size=size, dtype=np.uint64)
        u = (np.asarray(bits, dtype=float) + 0.5) / 2.0 ** 53
        return low + (high - low) * u

    def normal(self, mean=0.0, sd=1.0, size=None):
        return mean + sd * ndtri(self.uniform(size=size))

    def choice(self, levels, size):
        levels = np.asarray(levels)
        idx = np.minimum((self.uniform(size=size) * levels.size).astype(int),
                         levels.size - 1)
        return idx


@dataclass(frozen=True)
class SyntheticDataset:
    """A generated dataset together with the truth that produced it."""

    dataset: Dataset
    true_alpha: np.ndarray
    true_beta: np.ndarray
    true_labels: np.ndarray
    true_factors: np.ndarray
    generator_tag: str
    seed: int

    @property
    def K(self) -> int:
        return int(np.unique(self.true_labels).size)


def _levels_to_truth(stream, levels, n):
    idx = stream.choice(levels, n)
    return np.asarray(levels, dtype=float)[idx], idx + 1


def ar1_coefficients(r: int, literal: bool = False) -> np.ndarray:
    """Transition matrix with ``Phi_st = 0.5^{1(s=t)} 0.3^{|s-t|}``.

    For ``r >= 4`` this matrix has spectral radius above one and the
    recursion explodes.  Unless ``literal`` is set, a non-stationary matrix
    is rescaled to spectral radius ``STATIONARY_RADIUS`` so the factor
    process is stationary; its shape is unchanged.
    """
    s = np.arange(r)
    dist = np.abs(s[:, None] - s[None, :])
    phi = np.where(dist == 0, 0.5, 1.0) * 0.3 ** dist
    if literal:
        return phi
    radius = np.max(np.abs(np.linalg.eigvalsh(phi)))
    if radius >= 1.0:
        phi *= STATIONARY_RADIUS / radius
    return phi


def generate_scenario_ab(scenario: str, a: float, n: int, p: int, r: int = 4,
                         seed: int = 0, literal_phi: bool = False) -> SyntheticDataset:
    """Factor-structured covariates with two (A) or three (B) intercept levels.

    ``X = F B^T + U`` with ``B_ij ~ U(0, 1)``, ``u_i ~ N(0, 0.1 I)`` and
    factors from a vector AR(1) ``f_i = Phi f_{i-1} + xi_i``,
    ``xi_i ~ N(0, 0.1 I)``, started at zero with a 50-step burn-in.
    ``Y = alpha + X beta + eps`` with ``beta = (beta_1..beta_5, 0, ...)``,
    ``beta_j ~ U(0.8, 1)`` and ``eps ~ N(0, 0.1)``.  ``literal_phi`` keeps
    the transition matrix unscaled even when it is explosive (see
    :func:`ar1_coefficients`).
    """
    scenario = scenario.upper()
    if scenario not in ("A", "B"):
        raise InvalidArgumentError(f"scenario must be 'A' or 'B', got {scenario!r}")
    if n < 5 or p < 5 or r < 1:
        raise InvalidArgumentError("need n >= 5, p >= 5 and r >= 1")
    levels = [-a, a] if scenario == "A" else [-a, 0.0, a]
    st = SeededStream(seed)
    alpha, labels = _levels_to_truth(st, levels, n)
    beta = np.zeros(p)
    beta[:5] = st.uniform(0.8, 1.0, 5)
    B = st.uniform(0.0, 1.0, (p, r))
    Phi = ar1_coefficients(r, literal=literal_phi)
    sd = np.sqrt(0.1)
    f = np.zeros(r)
    F = np.empty((n, r))
    for t in range(AR1_BURN_IN + n):
        f = Phi @ f + st.normal(0.0, sd, r)
        if t >= AR1_BURN_IN:
            F[t - AR1_BURN_IN] = f
    U = st.normal(0.0, sd, (n, p))
    X = F @ B.T + U
    y = alpha + X @ beta + st.normal(0.0, sd, n)
    return SyntheticDataset(Dataset(y, X), alpha, beta, labels, F,
                            f"scenario-{scenario}(a={a:g},n={n},p={p},r={r})", seed)


def collinearity_covariance(s: int, p: int, stream: SeededStream) -> tuple[np.ndarray, np.ndarray]:
    """``(Gamma, Lambda)`` with ``Gamma = 5 (q_1..q_s)``, ``Lambda = Gamma Gamma^T + I``.

    ``q_j`` are the leading columns of the orthogonal factor of the QR
    decomposition of a p x p matrix with U(0, 1) entries.
    """
    if not 0 <= s <= p:
        raise InvalidArgumentError(f"need 0 <= s <= p, got s={s}, p={p}")
    A = stream.uniform(0.0, 1.0, (p, p))
    Q, _ = np.linalg.qr(A)
    Gamma = 5.0 * Q[:, :s]
    return Gamma, Gamma @ Gamma.T + np.eye(p)


def generate_collinearity_case(s: int, n: int, p: int, seed: int = 0) -> SyntheticDataset:
    """Spiked-covariance covariates without a factor model; ``s = 0`` is iid N(0, I).

    ``beta`` has ten U(1, 2) entries, intercepts are +-3 with equal
    probability and ``eps ~ N(0, 0.1)``.
    """
    if s < 0 or s > p:
        raise InvalidArgumentError(f"need 0 <= s <= p, got s={s}, p={p}")
    if p < 10:
        raise InvalidArgumentError("need p >= 10 for ten active coefficients")
    st = SeededStream(seed)
    alpha, labels = _levels_to_truth(st, [-3.0, 3.0], n)
    beta = np.zeros(p)
    beta[:10] = st.uniform(1.0, 2.0, 10)
    if s > 0:
        Gamma, _ = collinearity_covariance(s, p, st)
        X = st.normal(size=(n, s)) @ Gamma.T + st.normal(size=(n, p))
    else:
        X = st.normal(size=(n, p))
    y = alpha + X @ beta + st.normal(0.0, np.sqrt(0.1), n)
    return SyntheticDataset(Dataset(y, X), alpha, beta, labels, np.zeros((n, 0)),
                            f"collinearity(s={s},n={n},p={p})", seed)


def generate_toy(rho: float, n: int = 100, p: int = 100, seed: int = 0) -> SyntheticDataset:
    """Equicorrelated covariates ``N(0, Xi)``, ``Xi = (1 - rho) I + rho 11^T``.

    Intercepts are +-1, ten coefficients are U(2, 5) and
    ``eps ~ N(0, 0.01)``.
    """
    if not 0.0 <= rho <= 0.95:
        raise InvalidArgumentError(f"rho must lie in [0, 0.95], got {rho}")
    if p < 10:
        raise InvalidArgumentError("need p >= 10 for ten active coefficients")
    st = SeededStream(seed)
    alpha, labels = _levels_to_truth(st, [-1.0, 1.0], n)
    beta = np.zeros(p)
    beta[:10] = st.uniform(2.0, 5.0, 10)
    Xi = np.full((p, p), rho)
    np.fill_diagonal(Xi, 1.0)
    L = np.linalg.cholesky(Xi)
    X = st.normal(size=(n, p)) @ L.T
    y = alpha + X @ beta + st.normal(0.0, 0.1, n)
    return SyntheticDataset(Dataset(y, X), alpha, beta, labels, np.zeros((n, 0)),
                            f"toy(rho={rho:g},n={n},p={p})", seed)


def generate(kind: str, seed: int, **params) -> SyntheticDataset:
    """Dispatch by scenario name: ``A``, ``B``, ``collinearity`` or ``toy``."""
    kind_u = kind.upper()
    if kind_u in ("A", "B"):
        return generate_scenario_ab(kind_u, params.get("a", 3.0), params.get("n", 100),
                                    params.get("p", 50), params.get("r", 4), seed,
                                    params.get("literal_phi", False))
    if kind.lower() == "collinearity":
        return generate_collinearity_case(params.get("s", 3), params.get("n", 100),
                                          params.get("p", 50), seed)
    if kind.lower() == "toy":
        return generate_toy(params.get("rho", 0.5), params.get("n", 100),
                            params.get("p", 100), seed)
    raise InvalidArgumentError(f"unknown scenario {kind!r}")
