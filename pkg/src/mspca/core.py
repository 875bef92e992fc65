"""Mean-shift PCA: separate covariance spikes from mean-shift spikes.

The procedure runs PCA twice.  Between the two passes a random knockoff mean
``m'`` is added to a fraction ``pi'`` of the columns.  Outlying eigenvalues
caused by mean shifts move by a constant amount under the injection, while
those caused by the covariance stay put up to ``O(n^{-1/2})``.  Every outlier
of the first pass that finds a second-pass eigenvalue within
``eps = C n^{-1/2}`` is kept; the rest are discarded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rmt import d_transform_esd, mp_edges, spike_inverse
from .simulate import haar_unit_vector, membership_vectors
from .spectral import as_data_matrix, esd_of, sample_cov_eigs

# mixed into the knockoff seed so that ``seed=s`` never replays the stream of
# a dataset simulated from the same integer ``s``
KNOCKOFF_STREAM_TAG = 0x6B6E6F636B

__all__ = [
    "MsPcaConfig",
    "KnockoffSpec",
    "Match",
    "MsPcaResult",
    "default_threshold",
    "detect_outlying",
    "select_knockoff",
    "inject",
    "match_invariant",
    "run_ms_pca",
]


@dataclass
class MsPcaConfig:
    """Parameters of a mean-shift PCA run.

    ``C=None`` uses ``max(1, 1/c)``.  ``theta_prime_sq=None`` sets the
    knockoff strength to ``2 g^{-1}(lambda_1)`` (``theta_rule="mp"``) or
    ``2 / D_mu(lambda_1)`` with ``mu`` the ESD of the non-outlying
    eigenvalues (``theta_rule="esd"``, needs ``c <= 1``).  ``spike_margin=None``
    uses ``eps`` as the bulk-exit margin.
    """

    top_k_out: int = 1
    C: float | None = None
    pi_prime: float = 1.0
    theta_prime_sq: float | None = None
    theta_rule: str = "mp"
    spike_margin: float | None = None
    num_knockoffs: int = 1
    seed: int = 0
    solver: str = "auto"

    def __post_init__(self):
        if not 0 < self.pi_prime <= 1:
            raise ValueError("pi_prime must lie in (0, 1]")
        if self.C is not None and not self.C > 0:
            raise ValueError("C must be positive")
        if self.spike_margin is not None and self.spike_margin < 0:
            raise ValueError("spike_margin must be nonnegative")
        if self.theta_prime_sq is not None and not self.theta_prime_sq > 0:
            raise ValueError("theta_prime_sq must be positive")
        if self.theta_rule not in ("mp", "esd"):
            raise ValueError("theta_rule must be 'mp' or 'esd'")
        if self.num_knockoffs < 1 or self.top_k_out < 0:
            raise ValueError("num_knockoffs must be >= 1 and top_k_out >= 0")


@dataclass
class KnockoffSpec:
    """Knockoff mean ``m'`` applied to the columns flagged in ``gamma_prime``.

    ``pi_prime`` is the realised fraction of selected columns and
    ``||m'||^2 = theta_prime_sq / pi_prime``.
    """

    m_prime: np.ndarray
    gamma_prime: np.ndarray
    pi_prime: float
    theta_prime_sq: float
    no_initial_spike: bool = False


@dataclass
class Match:
    """Invariance check outcome for one outlying eigenvalue."""

    index: int
    eigenvalue: float
    matched: float
    distance: float
    stable: bool


@dataclass
class MsPcaResult:
    """Output of :func:`run_ms_pca`.

    ``stable`` and ``removed`` partition the examined outliers; both hold
    eigenpairs of the first (un-injected) decomposition, descending.
    ``fill`` pads the output with the largest non-outlying eigenpairs when
    fewer than ``top_k_out`` outliers survive.  ``neutral`` is set when no
    eigenvalue left the bulk, in which case nothing is filtered.
    """

    stable: list
    removed: list
    epsilon: float
    spike_count: int
    match_report: list
    fill: list = field(default_factory=list)
    neutral: bool = False
    knockoffs: list = field(default_factory=list)
    eigenvalues: np.ndarray | None = None
    perturbed_eigenvalues: list = field(default_factory=list)

    def components(self, k=None):
        """Leading output eigenpairs: stable outliers first, then fill.

        Returns ``(values, vectors, is_spike)`` with ``vectors`` of shape
        ``d x k``.
        """
        pairs = [(lam, u, True) for lam, u in self.stable] + [(lam, u, False) for lam, u in self.fill]
        if k is not None:
            pairs = pairs[:k]
        if not pairs:
            return np.zeros(0), np.zeros((0, 0)), np.zeros(0, dtype=bool)
        vals = np.array([p[0] for p in pairs])
        vecs = np.column_stack([p[1] for p in pairs])
        return vals, vecs, np.array([p[2] for p in pairs])

    def leading_vector(self):
        """Top output component (the estimate of the first clean PC)."""
        if self.stable:
            return self.stable[0][1]
        if self.fill:
            return self.fill[0][1]
        raise ValueError("result holds no components; rerun with top_k_out >= 1")


def default_threshold(c, n, C_override=None):
    """``eps = C / sqrt(n)`` with ``C = max(1, 1/c)`` unless overridden."""
    if n < 1:
        raise ValueError("n must be positive")
    C = C_override if C_override is not None else max(1.0, 1.0 / c)
    return C / math.sqrt(n)


def detect_outlying(eigenvalues, c, n, spike_margin=None, C=None):
    """Indices of eigenvalues above ``(1 + sqrt c)^2 + delta``.

    ``delta`` defaults to :func:`default_threshold`.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0:
        return []
    delta = default_threshold(c, n, C) if spike_margin is None else float(spike_margin)
    cut = mp_edges(c)[1] + delta
    return [int(i) for i in np.flatnonzero(lam > cut)]


def select_knockoff(lambda1_tilde, c, n, d, pi_prime, rng, theta_prime_sq=None, measure=None):
    """Draw a knockoff mean with the default parameter rules.

    The strength is ``theta'^2 = 2 g^{-1}(lambda_1)``; when ``measure`` is
    given, ``2 / D_measure(lambda_1)`` replaces it.  Without an outlying
    ``lambda_1`` the strength falls back to ``4 sqrt(c)`` and the knockoff is
    flagged ``no_initial_spike``.  The direction is uniform on the sphere and
    the selected columns are a uniformly random subset of size
    ``round(pi' n)``.
    """
    if not 0 < pi_prime <= 1:
        raise ValueError("pi_prime must lie in (0, 1]")
    no_spike = False
    if theta_prime_sq is None:
        edge = measure.sup if measure is not None else mp_edges(c)[1]
        if lambda1_tilde > edge:
            if measure is not None:
                theta_prime_sq = 2.0 / d_transform_esd(lambda1_tilde, measure, c)
            else:
                theta_prime_sq = 2.0 * spike_inverse(lambda1_tilde, c)
        else:
            theta_prime_sq = 4.0 * math.sqrt(c)
            no_spike = True
    dir_rng, mem_rng = rng.spawn(2)
    direction = haar_unit_vector(d, dir_rng)
    gamma = membership_vectors(n, [pi_prime], mem_rng)[0]
    count = int(gamma.sum())
    if count == 0:
        raise ValueError(f"pi_prime={pi_prime} selects no column out of n={n}")
    realised = count / n
    m_prime = math.sqrt(theta_prime_sq / realised) * direction
    return KnockoffSpec(m_prime, gamma, realised, float(theta_prime_sq), no_spike)


def inject(X_tilde, knockoff):
    """Return ``X_tilde + m' gamma'^T`` (column-wise add, input untouched)."""
    X_tilde = np.asarray(X_tilde, dtype=float)
    d, n = X_tilde.shape
    if knockoff.m_prime.shape != (d,) or knockoff.gamma_prime.shape != (n,):
        raise ValueError("knockoff dimensions do not match the data matrix")
    out = X_tilde.copy()
    out[:, knockoff.gamma_prime.astype(bool)] += knockoff.m_prime[:, None]
    return out


def match_invariant(spikes, perturbed_eigs, epsilon):
    """Nearest perturbed eigenvalue for each ``(index, eigenvalue)`` spike.

    A spike is stable iff some perturbed eigenvalue lies strictly within
    ``epsilon``; matching is existential, so one perturbed eigenvalue may
    serve several spikes.
    """
    pert = np.sort(np.asarray(perturbed_eigs, dtype=float))
    if pert.size == 0:
        raise ValueError("no perturbed eigenvalues to match against")
    report = []
    for idx, lam in spikes:
        pos = np.searchsorted(pert, lam)
        cand = pert[max(pos - 1, 0):pos + 1]
        j = int(np.argmin(np.abs(cand - lam)))
        dist = float(abs(cand[j] - lam))
        report.append(Match(int(idx), float(lam), float(cand[j]), dist, dist < epsilon))
    return report


def _decompose(X, top_k, solver, floor):
    return sample_cov_eigs(X, top_k, solver=solver, n_eigs=max(top_k, 8), floor=floor)


def run_ms_pca(X_tilde, config=None):
    """Mean-shift PCA on a column-sample matrix.

    Steps: decompose ``X_tilde X_tilde^T / n``; collect eigenvalues above the
    bulk edge plus margin; draw a knockoff (:func:`select_knockoff`), inject
    it and decompose again; keep the outliers that pass
    :func:`match_invariant`.  With ``num_knockoffs > 1`` the injection is
    repeated with independent knockoffs and an outlier must pass every time;
    its reported distance is the worst one.
    """
    cfg = config or MsPcaConfig()
    X = as_data_matrix(X_tilde)
    d, n = X.shape
    if d < 2 or n < 2:
        raise ValueError("need d >= 2 and n >= 2")
    c = d / n
    eps = default_threshold(c, n, cfg.C)
    delta = eps if cfg.spike_margin is None else cfg.spike_margin
    edge = mp_edges(c)[1]
    solver = "dense" if cfg.theta_rule == "esd" else cfg.solver

    k_vec = min(d, max(cfg.top_k_out, 1) + 4)
    spec = _decompose(X, k_vec, solver, edge + delta)
    lam = spec.eigenvalues
    spikes = detect_outlying(lam, c, n, delta)
    need = min(d, len(spikes) + cfg.top_k_out)
    if need > spec.top_k:
        spec = _decompose(X, need, solver, edge + delta)
        lam = spec.eigenvalues
    pairs = spec.pairs()

    def fill_from(exclude, count):
        out = []
        for i in range(spec.top_k):
            if len(out) >= count:
                break
            if i not in exclude:
                out.append(pairs[i][:2])
        return out

    if not spikes:
        return MsPcaResult([], [], eps, 0, [], fill_from(set(), cfg.top_k_out), True, [], lam, [])

    measure = None
    if cfg.theta_rule == "esd":
        measure = esd_of(np.delete(lam, spikes))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(cfg.seed), KNOCKOFF_STREAM_TAG])))
    reports, knockoffs, perturbed = [], [], []
    floor = min(lam[spikes[-1]] - eps, edge)
    for ko_rng in rng.spawn(cfg.num_knockoffs):
        ko = select_knockoff(float(lam[0]), c, n, d, cfg.pi_prime, ko_rng, cfg.theta_prime_sq, measure)
        pert = _decompose(inject(X, ko), 0, solver, floor).eigenvalues
        knockoffs.append(ko)
        perturbed.append(pert)
        reports.append(match_invariant([(i, lam[i]) for i in spikes], pert, eps))

    merged = []
    for j, i in enumerate(spikes):
        worst = max((rep[j] for rep in reports), key=lambda m: m.distance)
        merged.append(Match(i, float(lam[i]), worst.matched, worst.distance, worst.distance < eps))

    stable = [pairs[m.index][:2] for m in merged if m.stable]
    removed = [(pairs[m.index][0], pairs[m.index][1], m.distance) for m in merged if not m.stable]
    fill = fill_from(set(spikes), max(cfg.top_k_out - len(stable), 0))
    return MsPcaResult(stable, removed, eps, len(spikes), merged, fill, False, knockoffs, lam, perturbed)
