import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mspca.simulate import (
    InfeasibleWeightsError,
    MixtureSpec,
    SpikedCovSpec,
    contaminate,
    contaminate_mean_cov_shift,
    default_shift_magnitude,
    draw_directions,
    generate_inliers,
    haar_unit_vector,
    make_dataset,
    membership_vectors,
    orthonormal_spike_basis,
)
from mspca.spectral import sample_cov_eigs


def gen(seed):
    return np.random.default_rng(seed)


def test_haar_unit_vector_norm_and_determinism():
    v = haar_unit_vector(50, gen(1))
    assert abs(np.linalg.norm(v) - 1) < 1e-12
    np.testing.assert_array_equal(v, haar_unit_vector(50, gen(1)))
    with pytest.raises(ValueError):
        haar_unit_vector(0, gen(1))


def test_haar_pairs_nearly_orthogonal():
    d = 10_000
    rng = gen(7)
    ok = sum(abs(haar_unit_vector(d, rng) @ haar_unit_vector(d, rng)) < 5 / math.sqrt(d) for _ in range(100))
    assert ok >= 95


def test_orthonormal_spike_basis():
    B = orthonormal_spike_basis(8, 3, gen(2))
    np.testing.assert_allclose(B.T @ B, np.eye(3), atol=1e-10)
    np.testing.assert_array_equal(B, orthonormal_spike_basis(8, 3, gen(2)))
    with pytest.raises(ValueError):
        orthonormal_spike_basis(3, 4, gen(0))
    # r = 1 is a normalised Gaussian column up to sign, i.e. the Haar law
    b = orthonormal_spike_basis(6, 1, gen(9))[:, 0]
    g = gen(9).standard_normal((6, 1))[:, 0]
    np.testing.assert_allclose(np.abs(b), np.abs(g) / np.linalg.norm(g), atol=1e-12)


def test_spiked_cov_spec_validation():
    with pytest.raises(ValueError):
        SpikedCovSpec((-1.0,))
    assert SpikedCovSpec((2.0, 1.0)).r == 2


def test_generate_inliers_no_spike_is_mp_like():
    X, U = generate_inliers(1000, 1000, SpikedCovSpec(()), gen(4))
    assert U.shape == (1000, 0)
    lam = np.linalg.eigvalsh(X @ X.T / 1000)
    assert np.mean(lam > 4.0 + 0.2) < 0.01


def test_generate_inliers_population_covariance():
    # the spiked root must realise I + l u u^T exactly
    d = 6
    X, U = generate_inliers(d, 4, SpikedCovSpec((3.0,)), gen(5))
    Z = np.eye(d)
    from mspca.simulate import apply_spiked_root

    R = apply_spiked_root(Z, U, (3.0,))
    np.testing.assert_allclose(R @ R.T, np.eye(d) + 3.0 * U @ U.T, atol=1e-12)


def test_generate_inliers_determinism():
    a, _ = generate_inliers(3, 5, (1.0,), gen(12))
    b, _ = generate_inliers(3, 5, (1.0,), gen(12))
    assert a.tobytes() == b.tobytes()


def test_generate_inliers_spike_location():
    # largest eigenvalue against the spike-forward prediction 4.5 (l = 2, c = 1)
    n = 2000
    hits = 0
    for seed in range(25):
        X, _ = generate_inliers(n, n, (2.0,), gen(1000 + seed))
        top = sample_cov_eigs(X, 0, solver="partial", n_eigs=4).eigenvalues[0]
        hits += abs(top - 4.5) < 5 / math.sqrt(n)
    assert hits / 25 >= 0.90


def test_membership_vectors_examples():
    g = membership_vectors(10, [0.5], gen(0))
    assert g.sum() == 5
    empty = membership_vectors(10, [], gen(0))
    assert empty.shape == (0, 10)
    assert np.all(1 - empty.sum(axis=0) == 1)
    with pytest.raises(InfeasibleWeightsError):
        membership_vectors(10, [0.6, 0.5], gen(0))


def test_membership_positions_spread():
    means = [np.flatnonzero(membership_vectors(1000, [0.05], gen(s))[0]).mean() for s in range(25)]
    assert 400 <= np.mean(means) <= 600


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 300), w=st.lists(st.floats(0.0, 0.3), max_size=3), seed=st.integers(0, 2**31))
def test_membership_partition(n, w, seed):
    g = membership_vectors(n, w, gen(seed))
    assert g.dtype == np.int8
    col = g.sum(axis=0)
    assert set(np.unique(col)) <= {0, 1}
    assert np.array_equal(g.sum(axis=1), [round(x * n) for x in w])


def test_mixture_spec_validation():
    with pytest.raises(ValueError):
        MixtureSpec((1.0,), (0.5, 0.2))
    with pytest.raises(InfeasibleWeightsError):
        MixtureSpec((1.0, 1.0), (0.6, 0.5))
    with pytest.raises(ValueError):
        MixtureSpec((1.0,), (0.5,), direction_mode="spiral")


def test_draw_directions_modes():
    for mode in ("haar_sphere", "iid_gaussian", "rademacher"):
        V = draw_directions(400, 2, gen(1), mode)
        assert V.shape == (400, 2)
        assert np.all(np.abs(np.linalg.norm(V, axis=0) - 1) < 0.2)
    R = draw_directions(16, 1, gen(1), "rademacher")
    np.testing.assert_allclose(np.abs(R), 0.25)
    O = draw_directions(30, 3, gen(1), orthogonal=True)
    np.testing.assert_allclose(O.T @ O, np.eye(3), atol=1e-12)


def test_contaminate_no_components():
    X = gen(3).standard_normal((5, 7))
    ds = contaminate(X, MixtureSpec((), ()), gen(4))
    np.testing.assert_array_equal(ds.X_tilde, X)
    assert ds.inlier_indicator.sum() == 7


def test_contaminate_strength_rule():
    c, pi1 = 1.0, 0.5
    mag = default_shift_magnitude(c, pi1)
    ds = make_dataset(100, 100, (), (mag,), (pi1,), seed=1)
    assert ds.thetas[0] ** 2 == pytest.approx(4 * math.sqrt(c), abs=1e-12)


def test_contaminate_rank():
    ds = make_dataset(40, 60, (1.0,), (3.0, 2.0), (0.2, 0.3), seed=2)
    s = np.linalg.svd(ds.X_tilde - ds.X, compute_uv=False)
    assert s[2] < 1e-8 * s[0]
    np.testing.assert_allclose(ds.shift, ds.X_tilde - ds.X, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    d=st.integers(2, 40), n=st.integers(2, 60),
    mags=st.lists(st.floats(0.0, 10.0), min_size=0, max_size=3),
    seed=st.integers(0, 2**31),
    mode=st.sampled_from(["haar_sphere", "iid_gaussian", "rademacher"]),
)
def test_dataset_bookkeeping(d, n, mags, seed, mode):
    k = len(mags)
    weights = [0.9 / (k + 1)] * k
    ds = make_dataset(d, n, (), tuple(mags), tuple(weights), seed=seed, direction_mode=mode)
    # partition: inlier indicator plus memberships is all-ones
    total = ds.memberships.sum(axis=0) + ds.inlier_indicator
    assert np.all(total == 1)
    # strength bookkeeping
    pis = ds.memberships.sum(axis=1) / n
    np.testing.assert_allclose(ds.thetas, np.sqrt(pis) * np.linalg.norm(ds.means, axis=0), atol=1e-12)
    # X_tilde - X is the shift up to roundoff, and the shift has rank <= k
    scale = max(1.0, float(np.abs(ds.X_tilde).max()))
    np.testing.assert_allclose(ds.X_tilde - ds.X, ds.shift, atol=1e-13 * scale)
    if k:
        s = np.linalg.svd(ds.shift, compute_uv=False)
        if s[0] > 0 and len(s) > k:
            assert s[k] < 1e-8 * s[0]


def test_make_dataset_reproducible():
    a = make_dataset(30, 20, (2.0,), (3.0,), (0.25,), seed=77)
    b = make_dataset(30, 20, (2.0,), (3.0,), (0.25,), seed=77)
    for name in ("X", "X_tilde", "truth_U", "means", "memberships"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    c = make_dataset(30, 20, (2.0,), (3.0,), (0.25,), seed=78)
    assert not np.array_equal(a.X, c.X)


def test_streams_are_separate():
    # changing only the mixture leaves the inliers untouched
    a = make_dataset(30, 20, (2.0,), (3.0,), (0.25,), seed=5)
    b = make_dataset(30, 20, (2.0,), (1.0,), (0.5,), seed=5)
    assert a.X.tobytes() == b.X.tobytes()
    np.testing.assert_array_equal(a.directions, b.directions)


def test_mean_cov_shift_reduces_to_contaminate():
    d, n = 60, 80
    ds = contaminate_mean_cov_shift(d, n, (2.0,), 4.0, 0.2, 0.0, gen(10))
    inl, con, _ = gen(10).spawn(3)
    X, U = generate_inliers(d, n, (2.0,), inl)
    ref = contaminate(X, MixtureSpec((4.0,), (0.2,)), con, truth_U=U)
    assert ds.X_tilde.tobytes() == ref.X_tilde.tobytes()
    assert ds.X.tobytes() == ref.X.tobytes()


def test_mean_cov_shift_structure():
    d, n, pi1, m = 200, 1000, 0.05, 6.0
    ds = contaminate_mean_cov_shift(d, n, (2.0,), m, pi1, 2.0, gen(11))
    s = np.linalg.svd(ds.X_tilde - ds.X, compute_uv=False)
    assert s[1] < 1e-8 * s[0]
    out = ds.memberships[0].astype(bool)
    emp = ds.X_tilde[:, out].mean(axis=1)
    assert np.linalg.norm(emp - ds.means[:, 0]) < 5 * m / math.sqrt(pi1 * n)
    with pytest.raises(InfeasibleWeightsError):
        contaminate_mean_cov_shift(d, n, (), 1.0, 1.2, 0.0, gen(0))
    with pytest.raises(ValueError):
        contaminate_mean_cov_shift(d, n, (), 1.0, 0.1, -1.0, gen(0))


def test_mean_cov_shift_outlier_covariance():
    # outlier columns carry S1^{1/2} (I + l2 u2 u2^T) S1^{1/2}; check the quadratic form along u2
    d, n = 20, 60_000
    ds = contaminate_mean_cov_shift(d, n, (), 0.0, 0.5, 3.0, gen(12))
    out = ds.memberships[0].astype(bool)
    u2 = ds.extras["u2"]
    var_out = np.var(u2 @ ds.X[:, out])
    var_in = np.var(u2 @ ds.X[:, ~out])
    assert var_out == pytest.approx(4.0, rel=0.05)
    assert var_in == pytest.approx(1.0, rel=0.05)
