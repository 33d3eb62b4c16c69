"""Principal-component estimation of an approximate factor model.

The covariates are decomposed as ``X = F B^T + U`` with the normalisation
``F^T F / n = I_r``.  The estimated factors are ``sqrt(n)`` times the leading
eigenvectors of ``X X^T``, the loadings are ``B = F^T X / n`` and the
idiosyncratic part is the residual ``U = X - F B^T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InvalidArgumentError, NumericalFailureError

__all__ = [
    "Dataset",
    "FactorDecomposition",
    "estimate_factors",
    "gram_eigenvalues",
    "eigenvalue_ratio",
    "select_num_factors",
    "default_r_star",
    "no_factors",
]


@dataclass(frozen=True)
class Dataset:
    """Response vector ``response`` (length n) and design ``design`` (n x p)."""

    response: np.ndarray
    design: np.ndarray

    def __post_init__(self):
        y = np.ascontiguousarray(self.response, dtype=float)
        X = np.ascontiguousarray(self.design, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or X.ndim != 2:
            raise DataError("response must be 1-D and design 2-D")
        if X.shape[0] != y.shape[0]:
            raise DataError(
                f"response has {y.shape[0]} rows but design has {X.shape[0]}")
        if y.shape[0] < 2:
            raise DataError("need at least two observations")
        if X.shape[1] < 1:
            raise DataError("design needs at least one column")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DataError("dataset contains non-finite entries")
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "design", X)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class FactorDecomposition:
    """Estimated factors, loadings and idiosyncratic residuals.

    Attributes
    ----------
    factors : ndarray, shape (n, r)
        ``F``, scaled so that ``F^T F / n = I``.
    loadings : ndarray, shape (p, r)
        ``B = F^T X / n``.
    idiosyncratic : ndarray, shape (n, p)
        ``U = X - F B^T``.
    eigenvalues : ndarray
        Nonincreasing eigenvalues of ``X X^T`` (the nonzero-rank part,
        ``min(n, p)`` values), clipped at zero.
    """

    factors: np.ndarray
    loadings: np.ndarray
    idiosyncratic: np.ndarray
    eigenvalues: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def num_factors(self) -> int:
        return self.factors.shape[1]

    def explained_variance(self) -> np.ndarray:
        """Proportion of ``trace(X X^T)`` carried by each eigenvalue."""
        total = self.eigenvalues.sum()
        if total <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / total


def _fix_signs(vectors):
    # largest-magnitude entry of every column made positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _eigh_desc(M):
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(
            f"symmetric eigensolver failed on a {M.shape[0]}x{M.shape[0]} "
            f"Gram matrix: {exc}") from exc
    return w[::-1], V[:, ::-1]


def _as_design(data):
    if isinstance(data, Dataset):
        return data.design
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError("design must be a 2-D array")
    return X


def gram_eigenvalues(data) -> np.ndarray:
    """Nonincreasing eigenvalues of ``X X^T`` (``min(n, p)`` of them)."""
    X = _as_design(data)
    n, p = X.shape
    M = X @ X.T if n <= p else X.T @ X
    w, _ = _eigh_desc(M)
    return np.clip(w, 0.0, None)


def estimate_factors(data, r: int) -> FactorDecomposition:
    """Estimate ``r`` latent factors by principal components.

    The eigenproblem is solved on the n x n Gram matrix ``X X^T`` when
    ``n <= p`` and on the p x p matrix ``X^T X`` otherwise; both routes give
    the same factor space.  Each eigenvector's largest-magnitude entry is made
    positive so the output is deterministic.
    """
    X = _as_design(data)
    n, p = X.shape
    if not (isinstance(r, (int, np.integer)) and 1 <= r <= min(n, p)):
        raise InvalidArgumentError(
            f"number of factors r={r!r} must lie in [1, min(n, p)={min(n, p)}]")
    if n <= p:
        w, V = _eigh_desc(X @ X.T)
        vecs = V[:, :r]
    else:
        w, V = _eigh_desc(X.T @ X)
        top = w[:r]
        if np.any(top <= 0):
            raise NumericalFailureError(
                f"design has rank below r={r}; leading eigenvalues {top}")
        vecs = X @ V[:, :r] / np.sqrt(top)
        # re-orthonormalise to remove rounding from the p x p route
        vecs, _ = np.linalg.qr(vecs)
    vecs = _fix_signs(vecs)
    F = np.sqrt(n) * vecs
    B = X.T @ F / n
    U = X - F @ B.T
    return FactorDecomposition(factors=F, loadings=B, idiosyncratic=U,
                               eigenvalues=np.clip(w, 0.0, None))


def no_factors(data) -> FactorDecomposition:
    """Degenerate decomposition with zero factors, ``U = X``.

    This is the S-CAR pipeline: the clustering regression runs directly on
    the raw covariates.
    """
    X = _as_design(data)
    n, p = X.shape
    return FactorDecomposition(factors=np.zeros((n, 0)),
                               loadings=np.zeros((p, 0)),
                               idiosyncratic=X.copy(),
                               eigenvalues=gram_eigenvalues(X))


def default_r_star(n: int, p: int) -> int:
    return max(1, min(8, min(n, p) - 1))


def eigenvalue_ratio(eigenvalues, r_star: int, c_np: float = 0.0) -> int:
    """Index ``i`` in ``1..r_star`` maximising ``(l_i + c) / (l_{i+1} + c)``.

    Ties go to the smallest index.  Ratios with a zero denominator are
    treated as infinite.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    if r_star < 1 or r_star + 1 > ev.size:
        raise InvalidArgumentError(
            f"r_star={r_star} needs r_star + 1 <= {ev.size} eigenvalues")
    if c_np < 0:
        raise InvalidArgumentError("c_np must be nonnegative")
    num = ev[:r_star] + c_np
    den = ev[1:r_star + 1] + c_np
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    return int(np.argmax(ratios)) + 1


def select_num_factors(data, r_star: int | None = None, c_np: float = 0.0) -> int:
    """Choose the number of factors with the shifted eigenvalue-ratio rule."""
    X = _as_design(data)
    n, p = X.shape
    if r_star is None:
        r_star = default_r_star(n, p)
    if r_star < 1 or r_star + 1 > min(n, p):
        raise InvalidArgumentError(
            f"r_star={r_star} must satisfy 1 <= r_star and "
            f"r_star + 1 <= min(n, p) = {min(n, p)}")
    return eigenvalue_ratio(gram_eigenvalues(X), r_star, c_np)
