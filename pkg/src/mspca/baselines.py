"""Comparison estimators: plain, centred, winsorized and Tyler-shape PCA."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .spectral import DataError, as_data_matrix, sample_cov_eigs

__all__ = [
    "BaselineResult",
    "RankDeficiencyError",
    "vanilla_pca",
    "center_pca",
    "winsorize_pca",
    "winsorize_rows",
    "tyler_shape",
    "tyler_pca",
]

METHODS = ("vanilla", "center", "winsorize", "tyler")


class RankDeficiencyError(DataError):
    """The Tyler iterate cannot be inverted (``n <= d`` or zero columns)."""


@dataclass
class BaselineResult:
    """Top eigenpairs from a baseline; ``iterations``/``converged`` are Tyler-only."""

    method: str
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    iterations: int | None = None
    converged: bool | None = None

    @property
    def eigenpairs(self):
        return [(float(self.eigenvalues[i]), self.eigenvectors[:, i]) for i in range(self.eigenvalues.size)]

    def leading_vector(self):
        if self.eigenvalues.size == 0:
            raise ValueError("no components were requested")
        return self.eigenvectors[:, 0]


def _top(X, k, method, solver="auto"):
    d = X.shape[0]
    if not 0 <= k <= d:
        raise ValueError(f"k must lie in [0, d={d}], got {k}")
    spec = sample_cov_eigs(X, k, solver=solver, n_eigs=max(k, 4))
    return BaselineResult(method, spec.eigenvalues[:k].copy(), spec.eigenvectors)


def vanilla_pca(X, k=1, solver="auto"):
    """Top-``k`` eigenpairs of the uncentred ``X X^T / n``."""
    return _top(as_data_matrix(X), k, "vanilla", solver)


def center_pca(X, k=1, solver="auto"):
    """PCA after removing each row's sample mean."""
    X = as_data_matrix(X)
    return _top(X - X.mean(axis=1, keepdims=True), k, "center", solver)


def winsorize_rows(X, q=0.95):
    """Clip every row of ``X`` to its own ``[1 - q, q]`` empirical quantiles."""
    if not 0.5 < q < 1:
        raise ValueError(f"q must lie in (0.5, 1), got {q}")
    X = as_data_matrix(X)
    lo = np.quantile(X, 1.0 - q, axis=1, keepdims=True)
    hi = np.quantile(X, q, axis=1, keepdims=True)
    return np.clip(X, lo, hi)


def winsorize_pca(X, k=1, q=0.95, solver="auto"):
    """Row-wise winsorization followed by :func:`center_pca`."""
    res = center_pca(winsorize_rows(X, q), k, solver)
    res.method = "winsorize"
    return res


def tyler_shape(X, max_iter=200, tol=1e-6):
    """Tyler's M-estimator of shape, normalised to trace ``d``.

    Fixed point ``S <- (d/n) sum_i x_i x_i^T / (x_i^T S^{-1} x_i)`` from
    ``S = I``.  The quadratic forms come from a Cholesky solve, so one step
    costs two ``d x d x n`` products.  Stops when the relative Frobenius
    change falls below ``tol``.  Returns ``(S, iterations, converged)``.
    """
    X = as_data_matrix(X)
    d, n = X.shape
    if n <= d:
        raise RankDeficiencyError(f"Tyler's estimator needs n > d (got d={d}, n={n})")
    if np.any(np.all(X == 0.0, axis=0)):
        raise RankDeficiencyError("data matrix has an all-zero column")
    S = np.eye(d)
    converged = False
    it = 0
    for it in range(1, int(max_iter) + 1):
        try:
            L = linalg.cholesky(S, lower=True)
        except linalg.LinAlgError as exc:
            raise RankDeficiencyError("shape iterate lost positive definiteness") from exc
        Y = linalg.solve_triangular(L, X, lower=True)
        q = np.einsum("ij,ij->j", Y, Y)
        S_new = (X / q) @ X.T * (d / n)
        S_new = 0.5 * (S_new + S_new.T)
        S_new *= d / np.trace(S_new)
        change = linalg.norm(S_new - S) / linalg.norm(S)
        S = S_new
        if change < tol:
            converged = True
            break
    return S, it, converged


def tyler_pca(X, k=1, max_iter=200, tol=1e-6):
    """Top-``k`` eigenpairs of the Tyler shape matrix.

    Non-convergence within ``max_iter`` is reported through
    ``converged=False`` rather than raised.
    """
    X = as_data_matrix(X)
    d = X.shape[0]
    if not 0 <= k <= d:
        raise ValueError(f"k must lie in [0, d={d}], got {k}")
    S, iters, ok = tyler_shape(X, max_iter, tol)
    lam, V = linalg.eigh(S, subset_by_index=[d - k, d - 1] if k else None)
    lam, V = lam[::-1][:k], V[:, ::-1][:, :k]
    if k:
        idx = np.argmax(np.abs(V), axis=0)
        V = V * np.sign(V[idx, np.arange(k)])
    return BaselineResult("tyler", lam, V, iters, ok)
