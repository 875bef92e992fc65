"""Closed-form random matrix quantities for sample covariance spectra.

Everything here is a pure function of its arguments.  The Marchenko-Pastur
(MP) law with aspect ratio ``c = d / n`` is the reference bulk; spikes that
leave the bulk are located with the spike-forward map ``g`` and its inverse,
and the D-transform generalises ``1 / g^{-1}`` to an arbitrary (discrete)
spectral measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "RmtDomainError",
    "SubThresholdError",
    "RmtModel",
    "SpikePrediction",
    "EmpiricalMeasure",
    "mp_edges",
    "mp_density",
    "mp_discretization",
    "stieltjes_mp",
    "companion_stieltjes",
    "d_transform_mp",
    "d_transform_esd",
    "d_transform_esd_inverse",
    "spike_forward",
    "spike_inverse",
    "bbp_detectable",
    "predict_spikes",
]


class RmtDomainError(ValueError):
    """Argument outside the domain where a closed form is defined."""


class SubThresholdError(RmtDomainError):
    """Spike strength at or below the BBP threshold ``sqrt(c)``."""


def _check_ratio(c):
    if not (isinstance(c, (int, float, np.floating, np.integer)) and math.isfinite(c) and c > 0):
        raise RmtDomainError(f"aspect ratio must be positive and finite, got {c!r}")
    return float(c)


@dataclass(frozen=True)
class RmtModel:
    """MP reference model for aspect ratio ``c``."""

    c: float

    def __post_init__(self):
        _check_ratio(self.c)

    @property
    def lambda_minus(self) -> float:
        return mp_edges(self.c)[0]

    @property
    def lambda_plus(self) -> float:
        return mp_edges(self.c)[1]

    @property
    def bulk_edge(self) -> float:
        return self.lambda_plus


@dataclass(frozen=True)
class SpikePrediction:
    """Asymptotic outlier locations for given covariance and mean-shift strengths.

    ``lambda_P`` holds the covariance-induced spikes and ``lambda_A`` the
    mean-shift-induced ones, both ascending.  ``merged`` is their union in
    descending order.  Strengths at or below ``sqrt(c)`` end up in
    ``sub_threshold`` as ``(kind, strength)`` pairs; their eigenvalues stick to
    ``bulk_edge``.
    """

    lambda_P: list
    lambda_A: list
    merged: list
    bulk_edge: float
    sub_threshold: list = field(default_factory=list)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Discrete probability measure ``sum_t w_t * delta(atom_t)``."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.size == 0:
            raise ValueError("empty measure")
        if atoms.shape != weights.shape:
            raise ValueError("atoms and weights differ in length")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def sup(self) -> float:
        return float(self.atoms.max())

    def stieltjes(self, z: float) -> float:
        """``int 1 / (t - z) dmu(t)`` for real ``z`` off the atoms."""
        return float(np.dot(self.weights, 1.0 / (self.atoms - z)))


def mp_edges(c):
    """Support edges ``((1 - sqrt c)^2, (1 + sqrt c)^2)`` of the MP law."""
    c = _check_ratio(c)
    s = math.sqrt(c)
    return (1.0 - s) ** 2, (1.0 + s) ** 2


def mp_density(x, c):
    """Density of the absolutely continuous part of the MP law.

    For ``c > 1`` the law also carries an atom of mass ``1 - 1/c`` at zero,
    which this function does not include.
    """
    lo, hi = mp_edges(c)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > lo) & (x < hi)
    xi = x[inside]
    out[inside] = np.sqrt((hi - xi) * (xi - lo)) / (2.0 * math.pi * c * xi)
    return out


def mp_discretization(c, n_atoms=10_000):
    """Equal-mass quantile discretization of the MP law (``c <= 1``).

    Atoms sit at the mid-mass quantiles ``F^{-1}((j + 1/2) / n_atoms)``.  The
    CDF is evaluated on the substitution ``x = a + (b - a) sin^2(phi)``, which
    removes the square-root singularities at the edges.
    """
    c = _check_ratio(c)
    if c > 1:
        raise RmtDomainError("discretization implemented for c <= 1 only")
    lo, hi = mp_edges(c)

    phis = np.linspace(0.0, math.pi / 2, 20_001)
    x = lo + (hi - lo) * np.sin(phis) ** 2
    # density * dx/dphi with the square-root factors cancelled; finite at x -> 0
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = (hi - lo) ** 2 * np.sin(phis) ** 2 * np.cos(phis) ** 2 / (math.pi * c * x)
    if lo == 0.0:
        dens[0] = (hi - lo) ** 2 / (math.pi * c * (hi - lo))
    cdf = integrate.cumulative_simpson(dens, x=phis, initial=0.0)
    cdf /= cdf[-1]
    targets = (np.arange(n_atoms) + 0.5) / n_atoms
    phi_q = np.interp(targets, cdf, phis)
    atoms = lo + (hi - lo) * np.sin(phi_q) ** 2
    return EmpiricalMeasure(atoms, np.full(n_atoms, 1.0 / n_atoms))


def stieltjes_mp(z, c):
    """Stieltjes transform ``S_c(z) = int dmu_c(t) / (t - z)`` off the support.

    Real branch: the square root is taken positive above the bulk and negative
    below it, so that ``S_c(z) ~ -1/z`` as ``|z| -> inf``.
    """
    c = _check_ratio(c)
    z = float(z)
    lo, hi = mp_edges(c)
    if not math.isfinite(z) or z == 0.0 or lo <= z <= hi:
        raise RmtDomainError(f"z={z} is not in the real resolvent set of MP(c={c})")
    root = math.sqrt((z - hi) * (z - lo))
    if z < lo:
        root = -root
    b = z + c - 1.0
    # rationalised form avoids cancellation for large |z|:
    # (-b + root) / (2zc) == -2 / (b + root)
    return -2.0 / (b + root)


def companion_stieltjes(z, c):
    """Stieltjes transform of the Gram-side (``n x n``) limiting spectrum.

    ``c * S_c(z) + (c - 1) / z``; coincides with ``S_c`` at ``c = 1``.
    """
    s = stieltjes_mp(z, c)
    if c == 1:
        return s
    return c * s + (c - 1.0) / float(z)


def d_transform_mp(lam, c):
    """D-transform ``lam * S_c(lam) * S_{1/c}(lam)`` of the MP law above its bulk."""
    c = _check_ratio(c)
    if not lam > mp_edges(c)[1]:
        raise RmtDomainError(f"lambda={lam} must exceed the bulk edge {mp_edges(c)[1]}")
    return float(lam) * stieltjes_mp(lam, c) * companion_stieltjes(lam, c)


def d_transform_esd(lam, mu, c):
    """D-transform of a discrete measure ``mu`` at ``lam > max(atoms)``.

    With ``J = int dmu(t) / (lam - t)`` this is ``lam * J * (c J + (1 - c)/lam)``,
    i.e. ``lam * S_mu(lam) * S_mu'(lam)`` where ``mu'`` is the companion
    measure ``c mu + (1 - c) delta_0``.  Restricted to ``c <= 1``.
    """
    c = _check_ratio(c)
    if c > 1:
        raise RmtDomainError("d_transform_esd is only provided for c <= 1; use d_transform_mp")
    lam = float(lam)
    if not lam > mu.sup:
        raise RmtDomainError(f"lambda={lam} must exceed the largest atom {mu.sup}")
    j = float(np.dot(mu.weights, 1.0 / (lam - mu.atoms)))
    return lam * j * (c * j + (1.0 - c) / lam)


def d_transform_esd_inverse(target, mu, c, upper=None):
    """Solve ``d_transform_esd(lam, mu, c) == target`` for ``lam > max(atoms)``.

    This is the general-measure analogue of ``spike_forward(1 / target)``.
    The D-transform decreases from ``D(sup+)`` to 0, so bisection (brentq)
    on a bracket grown to the right is enough.  Raises
    :class:`SubThresholdError` when ``target >= D(sup+)``, i.e. the strength
    ``1/target`` does not push an eigenvalue out of the bulk.
    """
    if not target > 0:
        raise RmtDomainError("target must be positive")
    lo = mu.sup
    width = max(abs(lo), 1.0)
    near = lo + 1e-9 * width
    if d_transform_esd(near, mu, c) <= target:
        raise SubThresholdError(f"strength {1.0 / target} does not exit the bulk")
    hi = upper if upper is not None else lo + width
    while d_transform_esd(hi, mu, c) > target:
        hi = lo + 2.0 * (hi - lo)
    return optimize.brentq(lambda x: d_transform_esd(x, mu, c) - target, near, hi, xtol=1e-14, rtol=1e-14)


def spike_forward(ell, c):
    """Outlier location ``1 + l + c (1 + l) / l`` for a strength ``l > sqrt(c)``.

    Applies to covariance spikes ``l`` and to mean-shift strengths ``theta^2``.
    """
    c = _check_ratio(c)
    ell = float(ell)
    if not ell > math.sqrt(c):
        raise SubThresholdError(f"strength {ell} <= sqrt(c) = {math.sqrt(c)}")
    return 1.0 + ell + c * (1.0 + ell) / ell


def spike_inverse(lam, c):
    """Inverse of :func:`spike_forward` on ``((1 + sqrt c)^2, inf)``."""
    c = _check_ratio(c)
    lam = float(lam)
    edge = mp_edges(c)[1]
    if not lam > edge:
        raise RmtDomainError(f"lambda={lam} must exceed the bulk edge {edge}")
    b = lam - 1.0 - c
    disc = max(b * b - 4.0 * c, 0.0)
    return 0.5 * (b + math.sqrt(disc))


def bbp_detectable(strength, c):
    """True iff the strength strictly exceeds the BBP threshold ``sqrt(c)``."""
    return bool(float(strength) > math.sqrt(_check_ratio(c)))


def predict_spikes(ells, thetas_sq, c):
    """Asymptotic outliers from covariance spikes and mean-shift strengths."""
    c = _check_ratio(c)
    edge = mp_edges(c)[1]
    lam_p, lam_a, below = [], [], []
    for kind, values, sink in (("ell", ells, lam_p), ("theta_sq", thetas_sq, lam_a)):
        for s in values:
            s = float(s)
            if not math.isfinite(s):
                raise RmtDomainError(f"non-finite strength {s}")
            if bbp_detectable(s, c):
                sink.append(spike_forward(s, c))
            else:
                below.append((kind, s))
    lam_p.sort()
    lam_a.sort()
    merged = sorted(lam_p + lam_a, reverse=True)
    return SpikePrediction(lam_p, lam_a, merged, edge, below)
