import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mspca.baselines import (
    RankDeficiencyError,
    center_pca,
    tyler_pca,
    tyler_shape,
    vanilla_pca,
    winsorize_pca,
    winsorize_rows,
)
from mspca.simulate import default_shift_magnitude, generate_inliers, make_dataset


def gen(seed):
    return np.random.default_rng(seed)


def test_vanilla_k_zero_and_bounds():
    X = gen(0).standard_normal((6, 10))
    res = vanilla_pca(X, 0)
    assert res.eigenvalues.size == 0 and res.eigenpairs == []
    with pytest.raises(ValueError):
        res.leading_vector()
    with pytest.raises(ValueError):
        vanilla_pca(X, 7)


def test_vanilla_matches_eigh():
    X = gen(1).standard_normal((8, 30))
    res = vanilla_pca(X, 3)
    lam = np.linalg.eigvalsh(X @ X.T / 30)[::-1][:3]
    np.testing.assert_allclose(res.eigenvalues, lam, atol=1e-12)


def test_center_idempotent_on_centered_data():
    X = gen(2).standard_normal((10, 40))
    X -= X.mean(axis=1, keepdims=True)
    np.testing.assert_allclose(center_pca(X, 4).eigenvalues, vanilla_pca(X, 4).eigenvalues, atol=1e-10)


def test_center_constant_columns():
    X = np.tile(gen(3).standard_normal((5, 1)), (1, 12))
    res = center_pca(X, 2)
    np.testing.assert_allclose(res.eigenvalues, 0.0, atol=1e-14)


def test_winsorize_bounds_and_errors():
    X = gen(4).standard_normal((3, 200))
    X[1, 17] = 1e6
    W = winsorize_rows(X, 0.95)
    hi = np.quantile(X, 0.95, axis=1)
    lo = np.quantile(X, 0.05, axis=1)
    assert W[1, 17] == hi[1]
    assert np.all(W <= hi[:, None]) and np.all(W >= lo[:, None])
    for q in (0.5, 1.0, 0.2):
        with pytest.raises(ValueError):
            winsorize_rows(X, q)


def test_winsorize_near_one_matches_center():
    X = gen(5).uniform(-1, 1, (6, 50))
    # q this close to 1 moves each clip bound by ~1e-12 of the top gap
    a = winsorize_pca(X, 3, q=1 - 1e-12).eigenvalues
    b = center_pca(X, 3).eigenvalues
    np.testing.assert_allclose(a, b, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 8), n=st.integers(2, 60), q=st.floats(0.51, 0.99), seed=st.integers(0, 2**31))
def test_winsorize_within_quantiles(d, n, q, seed):
    X = gen(seed).standard_cauchy((d, n))
    W = winsorize_rows(X, q)
    assert np.all(W <= np.quantile(X, q, axis=1)[:, None])
    assert np.all(W >= np.quantile(X, 1 - q, axis=1)[:, None])


def test_tyler_identity_shape():
    X = gen(6).standard_normal((20, 2000))
    S, it, ok = tyler_shape(X)
    assert ok and it > 1
    assert np.trace(S) == pytest.approx(20.0)
    assert np.linalg.norm(S - np.eye(20)) < 0.1


def test_tyler_identity_shape_matches_sample_covariance_noise():
    # oracle: the trace-normalised sample covariance carries Frobenius noise ~ d / sqrt(n)
    X = gen(6).standard_normal((20, 2000))
    S, _, _ = tyler_shape(X)
    C = X @ X.T / 2000
    C *= 20 / np.trace(C)
    ref = np.linalg.norm(C - np.eye(20))
    assert np.linalg.norm(S - np.eye(20)) < 1.25 * ref


def test_tyler_infinite_tol_single_step():
    X = gen(7).standard_normal((5, 50))
    _, it, ok = tyler_shape(X, tol=math.inf)
    assert it == 1 and ok


def test_tyler_errors_and_nonconvergence():
    with pytest.raises(RankDeficiencyError):
        tyler_shape(gen(0).standard_normal((10, 10)))
    X = gen(0).standard_normal((4, 30))
    X[:, 3] = 0
    with pytest.raises(RankDeficiencyError):
        tyler_pca(X)
    res = tyler_pca(gen(8).standard_normal((10, 40)), 2, max_iter=2, tol=1e-14)
    assert res.converged is False and res.iterations == 2


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(1e-3, 1e3), neg=st.booleans(), seed=st.integers(0, 2**31))
def test_tyler_scale_invariance(scale, neg, seed):
    X = gen(seed).standard_normal((6, 80))
    a, _, _ = tyler_shape(X, tol=1e-10)
    b, _, _ = tyler_shape((-scale if neg else scale) * X, tol=1e-10)
    np.testing.assert_allclose(a, b, atol=1e-7)


@settings(max_examples=25, deadline=None)
@given(d=st.integers(2, 12), extra=st.integers(1, 40), k=st.integers(0, 2), seed=st.integers(0, 2**31))
def test_orthonormal_eigenvectors(d, extra, k, seed):
    k = min(k, d)
    X = gen(seed).standard_normal((d, d + extra))
    for res in (vanilla_pca(X, k), center_pca(X, k), winsorize_pca(X, k), tyler_pca(X, k)):
        V = res.eigenvectors[:, :k]
        np.testing.assert_allclose(V.T @ V, np.eye(k), atol=1e-8)
        assert np.all(np.diff(res.eigenvalues) <= 1e-12)


def test_vanilla_clean_alignment():
    n = 1000
    vals = []
    for seed in range(25):
        X, U = generate_inliers(n, n, (2.0,), gen(300 + seed))
        vals.append(abs(vanilla_pca(X, 1).leading_vector() @ U[:, 0]))
    # |<u_hat, u>|^2 -> (1 - c/l^2) / (1 + c/l) = 0.5 at l = 2, c = 1
    assert np.mean(vals) >= 0.6
    assert np.mean(np.square(vals)) == pytest.approx(0.5, abs=0.05)


def test_contaminated_baselines_fail():
    d, n, c, pi1 = 900, 1000, 0.9, 0.05
    out = {"vanilla": [], "center": [], "winsorize": []}
    for seed in range(25):
        ds = make_dataset(d, n, (2 * math.sqrt(c),), (default_shift_magnitude(c, pi1),), (pi1,), seed=seed)
        u = ds.truth_U[:, 0]
        out["vanilla"].append(abs(vanilla_pca(ds.X_tilde).leading_vector() @ u))
        out["center"].append(abs(center_pca(ds.X_tilde).leading_vector() @ u))
        out["winsorize"].append(abs(winsorize_pca(ds.X_tilde).leading_vector() @ u))
    for name, vals in out.items():
        assert np.mean(vals) <= 0.30, name
