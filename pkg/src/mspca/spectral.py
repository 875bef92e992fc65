"""Sample covariance eigendecomposition for column-sample data matrices.

A data matrix ``X`` is ``d x n`` with observations as columns, and the
sample covariance is the uncentred ``X X^T / n``.  When ``n < d`` the work is
done on the ``n x n`` Gram matrix ``X^T X / n`` and eigenvectors are lifted
back with ``u = X w / sqrt(n * lam)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, eigsh

from .rmt import EmpiricalMeasure

__all__ = [
    "DataError",
    "SpectrumResult",
    "as_data_matrix",
    "sample_cov_eigs",
    "esd_of",
    "cov_apply",
]

# dense solver up to this min(d, n) when solver="auto"
AUTO_DENSE_LIMIT = 1200


class DataError(ValueError):
    """Malformed or non-finite data matrix."""


def as_data_matrix(X):
    """Validate and return ``X`` as a 2-D float64 array with finite entries."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError(f"expected a non-empty d x n matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("data matrix has non-finite entries")
    return X


@dataclass
class SpectrumResult:
    """Eigenvalues (descending) and leading eigenvectors of ``X X^T / n``.

    ``eigenvalues`` holds every eigenvalue for the dense solver (the
    ``d - n`` structural zeros included when ``n < d``) and only the leading
    ones for the partial solver.  ``eigenvectors`` is ``d x top_k`` with unit
    columns matching the first ``top_k`` eigenvalues.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    top_k: int

    def pairs(self):
        return [(float(self.eigenvalues[i]), self.eigenvectors[:, i]) for i in range(self.top_k)]


def _fix_signs(V):
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _lift(X, lam, W, top_k):
    """Map Gram eigenvectors ``W`` to covariance eigenvectors."""
    d, n = X.shape
    scale = max(float(lam[0]) if lam.size else 0.0, 0.0)
    tiny = 1e-10 * max(d, n) * max(scale, np.finfo(float).tiny)
    n_pos = int(np.count_nonzero(lam > tiny))
    if top_k <= n_pos:
        return X @ W[:, :top_k] / np.sqrt(n * lam[:top_k])
    # requested directions beyond the rank live in the null space of X^T
    U_pos = X @ W[:, :n_pos] / np.sqrt(n * lam[:n_pos])
    basis = linalg.null_space(U_pos.T) if n_pos else np.eye(d)
    return np.hstack([U_pos, basis[:, : top_k - n_pos]])


def _dense(X, top_k, side="auto"):
    """Full decomposition; ``side`` forces the ``"gram"`` or ``"cov"`` path."""
    d, n = X.shape
    if side == "gram" or (side == "auto" and n < d):
        lam, W = linalg.eigh(X.T @ X / n)
        lam, W = lam[::-1], W[:, ::-1]
        U = _lift(X, lam, W, top_k)
        if d > n:
            lam = np.concatenate([lam, np.zeros(d - n)])
        else:
            lam = lam[:d]
    else:
        lam, V = linalg.eigh(X @ X.T / n)
        lam, V = lam[::-1], V[:, ::-1]
        U = V[:, :top_k].copy()
    return lam, U


def _partial(X, n_eigs, top_k, floor):
    d, n = X.shape
    m = min(d, n)
    if n < d:
        op = LinearOperator((n, n), matvec=lambda w: X.T @ (X @ w) / n, dtype=float)
    else:
        op = LinearOperator((d, d), matvec=lambda u: X @ (X.T @ u) / n, dtype=float)
    k = max(n_eigs, top_k, 1)
    while True:
        if k >= m - 1:
            return None
        v0 = np.ones(op.shape[0]) / np.sqrt(op.shape[0])
        lam, W = eigsh(op, k=k, which="LA", v0=v0, tol=0.0, ncv=min(m, max(2 * k + 1, 40)))
        order = np.argsort(lam)[::-1]
        lam, W = lam[order], W[:, order]
        if floor is None or lam[-1] < floor:
            break
        k *= 2
    if n < d:
        U = _lift(X, lam, W, top_k)
    else:
        U = W[:, :top_k].copy()
    return lam, U


def sample_cov_eigs(X, top_k=0, solver="dense", n_eigs=16, floor=None):
    """Eigendecomposition of the sample covariance ``X X^T / n``.

    Parameters
    ----------
    X : array_like, shape (d, n)
        Column-sample data matrix.
    top_k : int
        Number of leading eigenvectors to return.
    solver : {"dense", "partial", "auto"}
        ``"dense"`` decomposes the smaller of the covariance and the Gram
        matrix completely.  ``"partial"`` runs Lanczos (ARPACK) for the
        ``n_eigs`` largest eigenvalues only, doubling ``n_eigs`` until the
        smallest computed eigenvalue drops below ``floor``.  ``"auto"`` picks
        dense when ``min(d, n) <= 1200``.
    n_eigs, floor
        Partial solver controls, ignored by the dense solver.

    Eigenvectors follow a fixed sign convention: the entry of largest
    magnitude is positive.
    """
    X = as_data_matrix(X)
    d, n = X.shape
    top_k = int(top_k)
    if top_k < 0 or top_k > d:
        raise ValueError(f"top_k must lie in [0, d={d}], got {top_k}")
    if solver == "auto":
        solver = "dense" if min(d, n) <= AUTO_DENSE_LIMIT else "partial"
    if solver == "partial":
        out = _partial(X, int(n_eigs), top_k, floor) if top_k <= min(d, n) else None
        lam, U = out if out is not None else _dense(X, top_k)
    elif solver == "dense":
        lam, U = _dense(X, top_k)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return SpectrumResult(np.asarray(lam, dtype=float), _fix_signs(U), top_k)


def esd_of(eigenvalues):
    """Empirical spectral distribution: a uniform atom on every eigenvalue."""
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("empty spectrum")
    return EmpiricalMeasure(lam, np.full(lam.size, 1.0 / lam.size))


def cov_apply(X, u):
    """``(1/n) X (X^T u)`` without forming ``X X^T``."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(u, dtype=float)
    if X.ndim != 2 or u.shape[:1] != (X.shape[0],):
        raise ValueError(f"vector of length {u.shape} does not match d={X.shape[0]}")
    return X @ (X.T @ u) / X.shape[1]
