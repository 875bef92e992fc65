"""Monte-Carlo harness: metrics, scenario runners and record I/O.

A scenario runs a grid of cells (``d``, ``c``, ``pi1``, ``ell``, ``theta_sq``)
for a number of trials and emits one :class:`TrialRecord` per
(trial, method, metric).  Every trial draws from a seed derived by hashing
``base_seed``, the scenario and the cell coordinates together with the trial
index, so results do not depend on grid order or on how trials are
distributed over worker processes.

Defaults follow the standard experiment: covariance spike ``l = 2 sqrt(c)``,
mean-shift strength ``theta^2 = 4 sqrt(c)`` (``||m|| = 2 sqrt(sqrt(c)/pi1)``),
``pi' = 1``, ``theta'^2 = 2 g^{-1}(lambda_1)`` and ``C = max(1, 1/c)``.
Ground truth for alignment is the leading eigenvector of the clean sample
covariance ``X X^T / n``.
"""
from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy import stats

from .baselines import center_pca, tyler_pca, vanilla_pca, winsorize_pca
from .core import MsPcaConfig, run_ms_pca
from .rmt import bbp_detectable, spike_forward
from .simulate import contaminate_mean_cov_shift, make_dataset
from .spectral import cov_apply, sample_cov_eigs

__all__ = [
    "SCENARIOS",
    "METHODS",
    "CSV_FIELDS",
    "ExperimentConfig",
    "TrialRecord",
    "default_config",
    "derive_seed",
    "alignment",
    "residual_norm",
    "mean_shift_outliers",
    "exp_residual_decay",
    "exp_alignment_sweep",
    "exp_knockoff_spectrum",
    "exp_fluctuation",
    "exp_mean_cov_shift",
    "run_experiment",
    "aggregate",
    "loglog_slope",
    "validate_record",
    "write_csv",
    "read_csv",
    "write_json",
    "read_json",
    "format_summary",
    "write_svg",
]

SCENARIOS = ("residual_decay", "alignment_sweep", "knockoff_spectrum", "fluctuation", "mean_cov_shift")
METHODS = ("ms_pca", "vanilla", "center", "winsorize", "tyler")
CSV_FIELDS = ("scenario", "d", "n", "c", "pi1", "ell", "theta_sq", "method", "trial", "seed", "metric", "value")
_INT_FIELDS = ("d", "n", "trial", "seed")
_FLOAT_FIELDS = ("c", "pi1", "ell", "theta_sq", "value")
_STR_FIELDS = ("scenario", "method", "metric")


@dataclass(frozen=True)
class TrialRecord:
    scenario: str
    d: int
    n: int
    c: float
    pi1: float
    ell: float
    theta_sq: float
    method: str
    trial: int
    seed: int
    metric: str
    value: float

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Cell:
    """One grid point; ``n = round(d / c)``."""

    d: int
    c: float
    pi1: float
    ell: float
    theta_sq: float
    ell2: float = 0.0

    @property
    def n(self):
        return int(round(self.d / self.c))

    @property
    def magnitude(self):
        return math.sqrt(self.theta_sq / self.pi1) if self.pi1 > 0 else 0.0


@dataclass
class ExperimentConfig:
    """Grid and trial settings of a scenario.

    ``ell`` / ``theta_sq`` set to ``None`` use ``2 sqrt(c)`` / ``4 sqrt(c)``
    per aspect ratio.  ``ell2`` (outlier covariance spike) is only read by
    ``mean_cov_shift``.  ``C=None`` keeps the MS-PCA default threshold.
    """

    scenario: str
    d: tuple = (900,)
    c: tuple = (0.9,)
    pi1: tuple = (0.05,)
    ell: tuple | None = None
    theta_sq: tuple | None = None
    ell2: tuple = (2.0,)
    methods: tuple = ("ms_pca",)
    trials: int = 25
    base_seed: int = 0
    C: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        for name in ("d", "c", "pi1", "methods", "ell2"):
            if not len(getattr(self, name)):
                raise ValueError(f"grid axis {name!r} is empty")
        if self.ell is not None and not len(self.ell) or self.theta_sq is not None and not len(self.theta_sq):
            raise ValueError("grid axes ell/theta_sq must be None or nonempty")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if any(not 0 <= p < 1 for p in self.pi1) or any(c <= 0 for c in self.c) or any(d < 2 for d in self.d):
            raise ValueError("need pi1 in [0, 1), c > 0 and d >= 2")

    def cells(self):
        out = []
        for d, c, pi1 in itertools.product(self.d, self.c, self.pi1):
            ells = self.ell if self.ell is not None else (2.0 * math.sqrt(c),)
            thetas = self.theta_sq if self.theta_sq is not None else (4.0 * math.sqrt(c),)
            ell2s = self.ell2 if self.scenario == "mean_cov_shift" else (0.0,)
            for ell, th, e2 in itertools.product(ells, thetas, ell2s):
                out.append(Cell(int(d), float(c), float(pi1), float(ell), float(th), float(e2)))
        return out


_DEFAULTS = {
    "residual_decay": dict(d=(1000, 2000, 4000), c=(1.0,), pi1=(0.1,)),
    "alignment_sweep": dict(d=(900,), c=(0.9,), pi1=(0.05,), methods=METHODS),
    "knockoff_spectrum": dict(d=(1000,), c=(1.0,), pi1=(0.5,)),
    "fluctuation": dict(d=(500, 1000, 2000, 4000), c=(1.0,), pi1=(0.01, 0.1, 0.5)),
    "mean_cov_shift": dict(d=(900,), c=(0.9,), pi1=(0.05,), ell2=(2.0,), methods=("ms_pca", "center")),
}


def default_config(scenario, **overrides):
    """Scenario defaults at desk scale, updated with ``overrides``."""
    if scenario not in _DEFAULTS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    kw = dict(_DEFAULTS[scenario])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(scenario, **kw)


def derive_seed(base_seed, scenario, cell, trial):
    """64-bit seed from a BLAKE2b hash of the seed, scenario, cell and trial.

    Floats enter through their IEEE-754 bytes so the hash is exact.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", int(base_seed) & (2**64 - 1)))
    h.update(scenario.encode())
    h.update(struct.pack("<q", cell.d))
    h.update(struct.pack("<5d", cell.c, cell.pi1, cell.ell, cell.theta_sq, cell.ell2))
    h.update(struct.pack("<q", int(trial)))
    return int.from_bytes(h.digest(), "little")


def _check_unit(v, name):
    v = np.asarray(v, dtype=float).ravel()
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"{name} must be a unit vector (norm {nrm})")
    return v


def alignment(u, v):
    """``|<u, v>|`` for unit vectors, clipped into ``[0, 1]``."""
    u, v = _check_unit(u, "u"), _check_unit(v, "v")
    if u.shape != v.shape:
        raise ValueError("vectors differ in length")
    return float(min(abs(u @ v), 1.0))


def residual_norm(X, u, lam):
    """``||(1/n) X X^T u - lam u||_2`` for a unit ``u``."""
    u = _check_unit(u, "u")
    return float(np.linalg.norm(cov_apply(X, u) - lam * u))


def mean_shift_outliers(means, memberships, c):
    """Predicted outliers of the mean-shift part ``A = M Gamma^T``.

    The squared singular values of ``A / sqrt(n)`` are the eigenvalues of
    ``(M^T M)(Gamma^T Gamma / n)``; those above ``sqrt(c)`` are mapped
    through ``g``.  Returned descending.
    """
    M = np.asarray(means, dtype=float)
    G = np.asarray(memberships, dtype=float)
    if M.shape[1] == 0:
        return []
    s2 = np.linalg.eigvals((M.T @ M) @ (G @ G.T / G.shape[1])).real
    return sorted((spike_forward(s, c) for s in s2 if bbp_detectable(s, c)), reverse=True)


def _greedy_exclude(values, targets):
    """Indices left after removing, for each target, the nearest remaining value."""
    left = list(range(len(values)))
    for t in targets:
        if not left:
            break
        j = min(left, key=lambda i: abs(values[i] - t))
        left.remove(j)
    return left


# trial bodies: each returns [(method, metric, value), ...]

def _dataset(cell, seed):
    if cell.pi1 > 0:
        return make_dataset(cell.d, cell.n, (cell.ell,), (cell.magnitude,), (cell.pi1,), seed=seed)
    return make_dataset(cell.d, cell.n, (cell.ell,), seed=seed)


def _mspca(X, seed, C, top_k_out=1):
    return run_ms_pca(X, MsPcaConfig(top_k_out=top_k_out, C=C, seed=seed))


def _estimate(method, X, seed, C):
    if method == "ms_pca":
        return _mspca(X, seed, C).leading_vector()
    if method == "tyler":
        if X.shape[1] <= X.shape[0]:
            return None
        return tyler_pca(X, 1).leading_vector()
    fn = {"vanilla": vanilla_pca, "center": center_pca, "winsorize": winsorize_pca}[method]
    return fn(X, 1).leading_vector()


def _alignment_rows(ds, methods, seed, C):
    truth = ds.clean_sample_pcs(1)[:, 0]
    rows = []
    for m in methods:
        est = _estimate(m, ds.X_tilde, seed, C)
        rows.append((m, "alignment", math.nan if est is None else alignment(truth, est)))
    return rows


def _trial_alignment(cell, seed, cfg):
    return _alignment_rows(_dataset(cell, seed), cfg.methods, seed, cfg.C)


def _trial_mean_cov_shift(cell, seed, cfg):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    ds = contaminate_mean_cov_shift(cell.d, cell.n, (cell.ell,), cell.magnitude, cell.pi1, cell.ell2, rng)
    tag = f"@ell2={cell.ell2:g}"
    return [(m, metric + tag, v) for m, metric, v in _alignment_rows(ds, cfg.methods, seed, cfg.C)]


def _trial_residual(cell, seed, cfg):
    ds = _dataset(cell, seed)
    res = _mspca(ds.X_tilde, seed, cfg.C)
    lam_a = mean_shift_outliers(ds.means, ds.memberships, ds.c)
    spikes = [m.eigenvalue for m in res.match_report]
    keep = set(_greedy_exclude(spikes, lam_a))
    stable = iter(res.stable)
    vals = []
    for j, m in enumerate(res.match_report):
        if m.stable:
            lam, u = next(stable)
            if j in keep:
                vals.append(residual_norm(ds.X, u, lam))
    return [
        ("ms_pca", "max_residual", max(vals) if vals else math.nan),
        ("ms_pca", "stable_count", float(len(res.stable))),
    ]


def _trial_knockoff_spectrum(cell, seed, cfg):
    ds = _dataset(cell, seed)
    res = _mspca(ds.X_tilde, seed, cfg.C)
    clean = sample_cov_eigs(ds.X, 0, solver="auto", n_eigs=8).eigenvalues
    pert = res.perturbed_eigenvalues[0] if res.perturbed_eigenvalues else res.eigenvalues
    rows = []
    for name, lam in (("clean", clean), ("contaminated", res.eigenvalues), ("perturbed", pert)):
        rows += [("ms_pca", f"{name}_top{i + 1}", float(lam[i])) for i in range(min(5, len(lam)))]
    # label the outliers: nearest to the mean-shift prediction(s) first, rest are covariance spikes
    spikes = [m.eigenvalue for m in res.match_report]
    lam_a = mean_shift_outliers(ds.means, ds.memberships, ds.c)
    cov_idx = _greedy_exclude(spikes, lam_a)
    mean_idx = [i for i in range(len(spikes)) if i not in cov_idx]
    dist = [m.distance for m in res.match_report]
    rows.append(("ms_pca", "cov_spike_shift", max((dist[i] for i in cov_idx), default=math.nan)))
    rows.append(("ms_pca", "mean_spike_shift", min((dist[i] for i in mean_idx), default=math.nan)))
    rows.append(("ms_pca", "epsilon", res.epsilon))
    return rows


def _trial_fluctuation(cell, seed, cfg):
    ds = _dataset(cell, seed)
    res = _mspca(ds.X_tilde, seed, cfg.C)
    if not res.perturbed_eigenvalues:
        return [("ms_pca", "max_fluctuation", math.nan)]
    spikes = [m.eigenvalue for m in res.match_report]
    lam_a = mean_shift_outliers(ds.means, ds.memberships, ds.c)
    ko = res.knockoffs[0]
    M = np.column_stack([ds.means, ko.m_prime])
    G = np.vstack([ds.memberships, ko.gamma_prime[None, :]])
    lam_a_pert = mean_shift_outliers(M, G, ds.c)
    pert = list(res.perturbed_eigenvalues[0])
    left_t = _greedy_exclude(spikes, lam_a)
    left_p = _greedy_exclude(pert, lam_a_pert)
    if not left_t or not left_p:
        return [("ms_pca", "max_fluctuation", math.nan)]
    cand = np.array([pert[j] for j in left_p])
    fl = max(float(np.min(np.abs(cand - spikes[i]))) for i in left_t)
    return [("ms_pca", "max_fluctuation", fl)]


_RUNNERS = {
    "residual_decay": _trial_residual,
    "alignment_sweep": _trial_alignment,
    "knockoff_spectrum": _trial_knockoff_spectrum,
    "fluctuation": _trial_fluctuation,
    "mean_cov_shift": _trial_mean_cov_shift,
}


def _run_task(args):
    cfg, cell, trial = args
    seed = derive_seed(cfg.base_seed, cfg.scenario, cell, trial)
    rows = _RUNNERS[cfg.scenario](cell, seed, cfg)
    return [TrialRecord(cfg.scenario, cell.d, cell.n, cell.c, cell.pi1, cell.ell, cell.theta_sq,
                        m, int(trial), seed, metric, float(v)) for m, metric, v in rows]


def run_experiment(config: ExperimentConfig, progress=None):
    """Run every (cell, trial) of ``config`` and return the records.

    Records come in grid order, then trial, then method/metric order,
    however many ``workers`` were used.  ``progress`` is an optional callback
    receiving ``(done, total)``.
    """
    tasks = [(config, cell, t) for cell in config.cells() for t in range(int(config.trials))]
    out = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=int(config.workers)) as pool:
            for i, recs in enumerate(pool.map(_run_task, tasks)):
                out.extend(recs)
                if progress:
                    progress(i + 1, len(tasks))
    else:
        for i, task in enumerate(tasks):
            out.extend(_run_task(task))
            if progress:
                progress(i + 1, len(tasks))
    return out


def _scenario_runner(name):
    def run(config=None, **overrides):
        cfg = config if config is not None else default_config(name, **overrides)
        if cfg.scenario != name:
            cfg = replace(cfg, scenario=name)
        return run_experiment(cfg)

    run.__name__ = f"exp_{name}"
    return run


exp_residual_decay = _scenario_runner("residual_decay")
exp_residual_decay.__doc__ = """Max residual ``||(1/n) X X^T u - lam u||`` over stable MS-PCA pairs.

Per trial: the outlier closest to each predicted mean-shift location is set
aside, and the largest residual over the remaining stable pairs is emitted as
``max_residual`` (NaN when none remains)."""
exp_alignment_sweep = _scenario_runner("alignment_sweep")
exp_alignment_sweep.__doc__ = """Alignment of each method's top component with the clean sample PC."""
exp_knockoff_spectrum = _scenario_runner("knockoff_spectrum")
exp_knockoff_spectrum.__doc__ = """Top-5 eigenvalues of the clean, contaminated and injected data,
plus the match distance of the covariance and the mean-shift outliers."""
exp_fluctuation = _scenario_runner("fluctuation")
exp_fluctuation.__doc__ = """Largest eigenvalue movement under injection, away from mean-shift outliers.

Outliers nearest to the predicted mean-shift locations are dropped from the
first spectrum, and likewise for the injected mean-shift part (original plus
knockoff) in the second one; the statistic is the largest nearest-neighbour
distance from a remaining outlier to the remaining perturbed eigenvalues."""
exp_mean_cov_shift = _scenario_runner("mean_cov_shift")
exp_mean_cov_shift.__doc__ = """Alignment when outliers also carry a covariance spike ``ell2``.

The metric name carries the ``ell2`` coordinate, e.g. ``alignment@ell2=2``."""


_GROUP = ("scenario", "d", "n", "c", "pi1", "ell", "theta_sq", "method", "metric")


def aggregate(records):
    """Mean, std (ddof=1), median, quartiles and IQR per cell/method/metric.

    NaN values are dropped and counted in ``nan_count``.
    """
    groups = {}
    for r in records:
        key = tuple(getattr(r, f) for f in _GROUP)
        groups.setdefault(key, []).append(r.value)
    out = []
    for key, vals in groups.items():
        v = np.array(vals, dtype=float)
        fin = v[np.isfinite(v)]
        row = dict(zip(_GROUP, key))
        row["count"] = int(fin.size)
        row["nan_count"] = int(v.size - fin.size)
        if fin.size:
            q25, med, q75 = np.percentile(fin, [25, 50, 75])
            row.update(mean=float(fin.mean()), std=float(fin.std(ddof=1)) if fin.size > 1 else 0.0,
                       median=float(med), q25=float(q25), q75=float(q75), iqr=float(q75 - q25))
        else:
            row.update(mean=math.nan, std=math.nan, median=math.nan, q25=math.nan, q75=math.nan, iqr=math.nan)
        out.append(row)
    return out


def loglog_slope(x, y, level=0.95):
    """OLS slope of ``log y`` on ``log x`` with a two-sided t interval.

    Non-positive or non-finite pairs are dropped.  Returns
    ``(slope, intercept, lo, hi)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if np.count_nonzero(ok) < 3 or np.unique(x[ok]).size < 2:
        raise ValueError("need at least 3 positive points over 2 distinct x values")
    fit = stats.linregress(np.log(x[ok]), np.log(y[ok]))
    t = stats.t.ppf(0.5 + level / 2, np.count_nonzero(ok) - 2)
    return fit.slope, fit.intercept, fit.slope - t * fit.stderr, fit.slope + t * fit.stderr


def validate_record(rec):
    """Check a record (or its dict form) has every field with the right type."""
    row = rec.as_dict() if isinstance(rec, TrialRecord) else dict(rec)
    missing = [f for f in CSV_FIELDS if f not in row]
    if missing:
        raise ValueError(f"record missing fields {missing}")
    extra = set(row) - set(CSV_FIELDS)
    if extra:
        raise ValueError(f"record has unknown fields {sorted(extra)}")
    for f in _INT_FIELDS:
        if isinstance(row[f], bool) or not isinstance(row[f], (int, np.integer)):
            raise ValueError(f"field {f} must be an integer, got {row[f]!r}")
    for f in _FLOAT_FIELDS:
        if isinstance(row[f], bool) or not isinstance(row[f], (int, float, np.floating, np.integer)):
            raise ValueError(f"field {f} must be a number, got {row[f]!r}")
    for f in _STR_FIELDS:
        if not isinstance(row[f], str) or not row[f]:
            raise ValueError(f"field {f} must be a nonempty string")
    if row["scenario"] not in SCENARIOS:
        raise ValueError(f"unknown scenario {row['scenario']!r}")
    return True


def _from_row(row):
    kw = {}
    for f in fields(TrialRecord):
        v = row[f.name]
        if f.name in _INT_FIELDS:
            kw[f.name] = int(v)
        elif f.name in _FLOAT_FIELDS:
            kw[f.name] = float(v)
        else:
            kw[f.name] = str(v)
    return TrialRecord(**kw)


def write_csv(records, path_or_file):
    """CSV with the fixed header; floats in shortest round-trip form."""
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, f) for f in CSV_FIELDS)])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            emit(fh)


def read_csv(path_or_file):
    def parse(fh):
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [_from_row(row) for row in reader]

    if hasattr(path_or_file, "read"):
        return parse(path_or_file)
    with open(path_or_file, newline="", encoding="utf-8") as fh:
        return parse(fh)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_json(records, path_or_file):
    """JSON list of record objects; NaN is written as ``null``."""
    data = [{f: _json_value(getattr(r, f)) for f in CSV_FIELDS} for r in records]
    if hasattr(path_or_file, "write"):
        json.dump(data, path_or_file, indent=1)
        path_or_file.write("\n")
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=1)
            fh.write("\n")


def read_json(path_or_file):
    if hasattr(path_or_file, "read"):
        data = json.load(path_or_file)
    else:
        with open(path_or_file, encoding="utf-8") as fh:
            data = json.load(fh)
    out = []
    for row in data:
        row = {k: (math.nan if v is None and k == "value" else v) for k, v in row.items()}
        validate_record(row)
        out.append(_from_row(row))
    return out


def format_summary(aggregates):
    """Plain-text table of aggregated metrics."""
    head = f"{'scenario':<18}{'d':>6}{'n':>6}{'pi1':>7}{'method':>10}  {'metric':<22}{'count':>6}{'mean':>11}{'std':>11}{'median':>11}{'iqr':>11}"
    lines = [head, "-" * len(head)]
    for a in aggregates:
        lines.append(
            f"{a['scenario']:<18}{a['d']:>6}{a['n']:>6}{a['pi1']:>7.3g}{a['method']:>10}  {a['metric']:<22}"
            f"{a['count']:>6}{a['mean']:>11.4g}{a['std']:>11.4g}{a['median']:>11.4g}{a['iqr']:>11.4g}"
        )
    return "\n".join(lines)


def write_svg(aggregates, path, metric, x="d", group="pi1", log=True, width=480, height=320):
    """Polyline of ``median`` versus ``x`` per ``group``, with IQR whiskers."""
    rows = [a for a in aggregates if a["metric"] == metric and math.isfinite(a["median"]) and a["median"] > 0]
    if not rows:
        raise ValueError(f"no finite aggregates for metric {metric!r}")
    tf = (lambda v: math.log10(v)) if log else (lambda v: v)
    xs = [tf(a[x]) for a in rows]
    lo_vals = [tf(max(a["q25"], a["median"] * 1e-3)) if log else a["q25"] for a in rows]
    hi_vals = [tf(a["q75"]) for a in rows]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(lo_vals), max(hi_vals)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    pad = 40

    def px(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{pad}" y="20" font-size="12">{metric} vs {x}{" (log-log)" if log else ""}</text>']
    keys = sorted({a[group] for a in rows}, key=str)
    for gi, key in enumerate(keys):
        col = colors[gi % len(colors)]
        pts = sorted((a for a in rows if a[group] == key), key=lambda a: a[x])
        coords = " ".join(f"{px(tf(a[x])):.1f},{py(tf(a['median'])):.1f}" for a in pts)
        parts.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{coords}"/>')
        for a in pts:
            lo = tf(max(a["q25"], a["median"] * 1e-3)) if log else a["q25"]
            parts.append(f'<line x1="{px(tf(a[x])):.1f}" x2="{px(tf(a[x])):.1f}" y1="{py(lo):.1f}" '
                         f'y2="{py(tf(a["q75"])):.1f}" stroke="{col}"/>')
        parts.append(f'<text x="{width - pad - 60}" y="{30 + 14 * gi}" font-size="11" fill="{col}">{group}={key}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
