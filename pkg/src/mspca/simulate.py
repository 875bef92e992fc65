"""Synthetic data under the spiked-covariance mean-shift mixture model.

Inliers are ``X = (I + P)^{1/2} Z`` with ``P = sum_i l_i u_i u_i^T`` and ``Z``
i.i.d. standard; contamination adds ``A = sum_i m_i gamma_i^T`` where the
membership vectors ``gamma_i`` select disjoint sets of columns.

Randomness
----------
Every function that draws takes a :class:`numpy.random.Generator`.  Functions
needing several independent sources split their generator with
``Generator.spawn``, so e.g. the mean-shift directions, the memberships and
the noise ``Z`` come from distinct child streams of the seed's
:class:`numpy.random.SeedSequence`.  :func:`make_dataset` starts from an
integer seed; its stream layout is::

    SeedSequence(seed).spawn(2) -> [inliers, contamination]
    inliers        -> spawn(2)  -> [spike basis, Z]
    contamination  -> spawn(2)  -> [directions, memberships]

Results are bit-identical for identical inputs on the same build.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import as_data_matrix, sample_cov_eigs

__all__ = [
    "InfeasibleWeightsError",
    "SpikedCovSpec",
    "MixtureSpec",
    "Dataset",
    "haar_unit_vector",
    "orthonormal_spike_basis",
    "apply_spiked_root",
    "generate_inliers",
    "membership_vectors",
    "draw_directions",
    "contaminate",
    "contaminate_mean_cov_shift",
    "make_dataset",
    "default_shift_magnitude",
]

DIRECTION_MODES = ("haar_sphere", "iid_gaussian", "rademacher")
ENTRY_MODES = ("gaussian", "rademacher")


class InfeasibleWeightsError(ValueError):
    """Mixture weights that cannot be realised on ``n`` samples."""


@dataclass(frozen=True)
class SpikedCovSpec:
    """Population covariance ``I + sum_i l_i u_i u_i^T``."""

    ells: tuple = ()

    def __post_init__(self):
        ells = tuple(float(x) for x in self.ells)
        if any(not math.isfinite(x) or x <= -1 for x in ells):
            raise ValueError(f"spikes must be finite and > -1 so that I + P is invertible, got {ells}")
        object.__setattr__(self, "ells", ells)

    @property
    def r(self):
        return len(self.ells)


@dataclass(frozen=True)
class MixtureSpec:
    """Mean-shift components: magnitudes ``||m_i||`` and weights ``pi_i``.

    ``direction_mode`` picks how ``v_i`` is drawn: uniform on the sphere,
    i.i.d. ``N(0, 1/d)`` entries (not renormalised), or i.i.d. ``+-1/sqrt(d)``.
    ``orthogonal=True`` orthonormalises the directions across components.
    """

    magnitudes: tuple = ()
    weights: tuple = ()
    direction_mode: str = "haar_sphere"
    orthogonal: bool = False

    def __post_init__(self):
        mags = tuple(float(x) for x in self.magnitudes)
        wts = tuple(float(x) for x in self.weights)
        if len(mags) != len(wts):
            raise ValueError("magnitudes and weights must have the same length")
        if any(not math.isfinite(m) or m < 0 for m in mags):
            raise ValueError("magnitudes must be finite and nonnegative")
        if any(not 0 < w < 1 for w in wts) or sum(wts) >= 1:
            raise InfeasibleWeightsError(f"weights must lie in (0, 1) with sum < 1, got {wts}")
        if self.direction_mode not in DIRECTION_MODES:
            raise ValueError(f"direction_mode must be one of {DIRECTION_MODES}")
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "weights", wts)

    @property
    def k(self):
        return len(self.magnitudes)

    @property
    def strengths(self):
        """Nominal ``theta_i = sqrt(pi_i) * ||m_i||``."""
        return tuple(math.sqrt(w) * m for w, m in zip(self.weights, self.magnitudes))


@dataclass
class Dataset:
    """A clean/contaminated pair with the factors that built it.

    ``memberships`` is a ``k x n`` 0/1 array, ``means`` the ``d x k`` matrix
    of realised shift vectors ``m_i`` and ``directions`` their unit
    directions.  ``thetas`` holds ``sqrt(pi_i) * ||m_i||`` with ``pi_i`` the
    realised fraction of columns in component ``i``.
    """

    X: np.ndarray
    X_tilde: np.ndarray
    truth_U: np.ndarray
    ells: tuple
    means: np.ndarray
    directions: np.ndarray
    memberships: np.ndarray
    thetas: np.ndarray
    seed: int | None = None
    extras: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]

    @property
    def c(self):
        return self.d / self.n

    @property
    def weights(self):
        return self.memberships.sum(axis=1) / self.n

    @property
    def inlier_indicator(self):
        return (1 - self.memberships.sum(axis=0)).astype(np.int8)

    @property
    def shift(self):
        """The mean-shift matrix ``A = X_tilde - X`` rebuilt from its factors."""
        return self.means @ self.memberships.astype(float)

    def clean_sample_pcs(self, k=1, solver="auto"):
        """Leading eigenvectors of the clean sample covariance ``X X^T / n``."""
        return sample_cov_eigs(self.X, k, solver=solver, n_eigs=max(k, 4)).eigenvectors


def haar_unit_vector(d, rng):
    """Uniform draw from the unit sphere in ``R^d`` (normalised Gaussian)."""
    d = int(d)
    if d < 1:
        raise ValueError("dimension must be at least 1")
    v = rng.standard_normal(d)
    nrm = np.linalg.norm(v)
    while nrm == 0.0:
        v = rng.standard_normal(d)
        nrm = np.linalg.norm(v)
    return v / nrm


def orthonormal_spike_basis(d, r, rng):
    """``d x r`` matrix with orthonormal columns (Q factor of a Gaussian matrix)."""
    if r > d:
        raise ValueError(f"cannot fit {r} orthonormal vectors in dimension {d}")
    if r == 0:
        return np.zeros((d, 0))
    G = rng.standard_normal((d, r))
    Q, R = np.linalg.qr(G)
    # sign fix makes Q Haar distributed
    return Q * np.sign(np.diag(R))


def apply_spiked_root(Z, U, ells):
    """``(I + U diag(l) U^T)^{1/2} Z`` for orthonormal ``U``, in O(r d n)."""
    if not len(ells):
        return Z
    coef = np.sqrt(1.0 + np.asarray(ells, dtype=float)) - 1.0
    return Z + (U * coef) @ (U.T @ Z)


def _draw_entries(shape, rng, entries):
    if entries == "gaussian":
        return rng.standard_normal(shape)
    if entries == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=shape)
    raise ValueError(f"entries must be one of {ENTRY_MODES}")


def generate_inliers(d, n, cov, rng, entries="gaussian"):
    """Draw ``X = (I + P)^{1/2} Z`` and return ``(X, U)`` with ``U`` the spike basis."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    if not isinstance(cov, SpikedCovSpec):
        cov = SpikedCovSpec(tuple(cov))
    basis_rng, z_rng = rng.spawn(2)
    U = orthonormal_spike_basis(d, cov.r, basis_rng)
    Z = _draw_entries((d, n), z_rng, entries)
    return apply_spiked_root(Z, U, cov.ells), U


def membership_vectors(n, weights, rng):
    """Disjoint 0/1 membership rows with exactly ``round(pi_i * n)`` ones each.

    Positions come from one uniform permutation of ``range(n)``, consumed
    component by component.  Returns a ``k x n`` int8 array; the inlier
    indicator is ``1 - rows.sum(0)``.
    """
    counts = [int(round(float(w) * n)) for w in weights]
    if any(w < 0 for w in weights) or sum(counts) > n:
        raise InfeasibleWeightsError(f"weights {list(weights)} need {sum(counts)} > n={n} samples")
    out = np.zeros((len(counts), n), dtype=np.int8)
    if not counts:
        return out
    perm = rng.permutation(n)
    start = 0
    for i, cnt in enumerate(counts):
        out[i, perm[start:start + cnt]] = 1
        start += cnt
    return out


def draw_directions(d, k, rng, mode="haar_sphere", orthogonal=False):
    """``d x k`` matrix of mean-shift directions, one independent column each."""
    if mode not in DIRECTION_MODES:
        raise ValueError(f"direction mode must be one of {DIRECTION_MODES}")
    if k == 0:
        return np.zeros((d, 0))
    if orthogonal:
        return orthonormal_spike_basis(d, k, rng)
    cols = []
    for _ in range(k):
        if mode == "haar_sphere":
            cols.append(haar_unit_vector(d, rng))
        elif mode == "iid_gaussian":
            cols.append(rng.standard_normal(d) / math.sqrt(d))
        else:
            cols.append(rng.choice(np.array([-1.0, 1.0]), size=d) / math.sqrt(d))
    return np.column_stack(cols)


def _assemble(X, X_tilde, U, ells, V, magnitudes, gammas, seed, extras=None):
    means = V * np.asarray(magnitudes, dtype=float)
    n = X.shape[1]
    pis = gammas.sum(axis=1) / n
    thetas = np.sqrt(pis) * np.linalg.norm(means, axis=0)
    return Dataset(X, X_tilde, U, tuple(ells), means, V, gammas, thetas, seed, extras or {})


def contaminate(X, mix, rng, truth_U=None, ells=(), seed=None):
    """Add ``A = sum_i m_i gamma_i^T`` to the columns of ``X``.

    The shift is applied column-wise (every selected column gets ``m_i``),
    which equals the dense ``X + A`` exactly.
    """
    X = as_data_matrix(X)
    d, n = X.shape
    dir_rng, mem_rng = rng.spawn(2)
    V = draw_directions(d, mix.k, dir_rng, mix.direction_mode, mix.orthogonal)
    gammas = membership_vectors(n, mix.weights, mem_rng)
    X_tilde = X.copy()
    for i, mag in enumerate(mix.magnitudes):
        X_tilde[:, gammas[i].astype(bool)] += (mag * V[:, i])[:, None]
    if truth_U is None:
        truth_U = np.zeros((d, 0))
    return _assemble(X, X_tilde, truth_U, ells, V, mix.magnitudes, gammas, seed)


def contaminate_mean_cov_shift(d, n, ells, m1_norm, pi1, ell2, rng, entries="gaussian",
                               direction_mode="haar_sphere"):
    """Mixture of ``N(0, S1)`` inliers and shifted outliers with an extra spike.

    Inliers are ``S1^{1/2} z`` with ``S1 = I + P1``; outliers are
    ``S1^{1/2} (I + P2)^{1/2} z + m1`` where ``P2 = l2 u2 u2^T`` has its own
    Haar direction.  The outlier covariance is the symmetric
    ``S1^{1/2} (I + P2) S1^{1/2}``.  ``X`` is the data before the mean shift
    (covariance shift included), so ``X_tilde - X`` stays rank one.  With
    ``ell2 = 0`` the draws coincide bit for bit with ``contaminate(generate_inliers(...))`` on the same children of
    ``rng``.
    """
    if not 0 < pi1 < 1:
        raise InfeasibleWeightsError(f"pi1 must lie in (0, 1), got {pi1}")
    if not ell2 > -1:
        raise ValueError("ell2 must exceed -1")
    cov = SpikedCovSpec(tuple(ells))
    mix = MixtureSpec((m1_norm,), (pi1,), direction_mode)
    inl_rng, con_rng, p2_rng = rng.spawn(3)
    basis_rng, z_rng = inl_rng.spawn(2)
    dir_rng, mem_rng = con_rng.spawn(2)
    U = orthonormal_spike_basis(d, cov.r, basis_rng)
    Z = _draw_entries((d, n), z_rng, entries)
    V = draw_directions(d, 1, dir_rng, direction_mode)
    gammas = membership_vectors(n, (pi1,), mem_rng)
    u2 = haar_unit_vector(d, p2_rng)
    out = gammas[0].astype(bool)
    Z_shift = Z.copy()
    Z_shift[:, out] = apply_spiked_root(Z[:, out], u2[:, None], (ell2,))
    X = apply_spiked_root(Z_shift, U, cov.ells)
    X_tilde = X.copy()
    X_tilde[:, out] += (m1_norm * V[:, 0])[:, None]
    return _assemble(X, X_tilde, U, cov.ells, V, mix.magnitudes, gammas, None,
                     {"u2": u2, "ell2": float(ell2)})


def make_dataset(d, n, ells=(), magnitudes=(), weights=(), seed=0, direction_mode="haar_sphere",
                 entries="gaussian", orthogonal=False):
    """One-call dataset: spiked inliers plus mean-shift contamination from ``seed``."""
    ss = np.random.SeedSequence(int(seed))
    inl, con = (np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(2))
    cov = SpikedCovSpec(tuple(ells))
    mix = MixtureSpec(tuple(magnitudes), tuple(weights), direction_mode, orthogonal)
    X, U = generate_inliers(d, n, cov, inl, entries)
    return contaminate(X, mix, con, truth_U=U, ells=cov.ells, seed=int(seed))


def default_shift_magnitude(c, pi1):
    """Mean-shift norm ``2 sqrt(sqrt(c) / pi1)``, giving ``theta^2 = 4 sqrt(c)``."""
    return 2.0 * math.sqrt(math.sqrt(c) / pi1)
