"""Mean-shift PCA: separating covariance spikes from mean-shift contamination.

Submodules: :mod:`~mspca.rmt` (closed-form spectra), :mod:`~mspca.spectral`
(sample covariance eigensolvers), :mod:`~mspca.simulate` (synthetic data),
:mod:`~mspca.core` (the estimator), :mod:`~mspca.baselines`,
:mod:`~mspca.bench` (Monte-Carlo harness) and :mod:`~mspca.cli`.
"""
from .baselines import BaselineResult, center_pca, tyler_pca, vanilla_pca, winsorize_pca
from .core import KnockoffSpec, MsPcaConfig, MsPcaResult, run_ms_pca
from .rmt import (
    EmpiricalMeasure,
    RmtModel,
    d_transform_esd,
    d_transform_mp,
    mp_edges,
    predict_spikes,
    spike_forward,
    spike_inverse,
    stieltjes_mp,
)
from .simulate import Dataset, make_dataset
from .spectral import sample_cov_eigs

__version__ = "0.1.0"

__all__ = [
    "BaselineResult",
    "Dataset",
    "EmpiricalMeasure",
    "KnockoffSpec",
    "MsPcaConfig",
    "MsPcaResult",
    "RmtModel",
    "center_pca",
    "d_transform_esd",
    "d_transform_mp",
    "make_dataset",
    "mp_edges",
    "predict_spikes",
    "run_ms_pca",
    "sample_cov_eigs",
    "spike_forward",
    "spike_inverse",
    "stieltjes_mp",
    "tyler_pca",
    "vanilla_pca",
    "winsorize_pca",
]
