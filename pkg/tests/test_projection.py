import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solo import ScenarioConfig, ShapeBasis, SupportSet, generate, pcp, sparse_project, uncorrupted_set
from solo.projection import default_eps
from solo.registration import shape_basis


def setup_frame(seed, frac=0.05, m=100):
    """Basis from a clean sequence plus a fresh frame A0 V^T + E0."""
    gt = generate(ScenarioConfig(frames=20, features=m, seed=seed))
    V = shape_basis(gt.clean_X.data)
    rng = np.random.default_rng(seed)
    W0 = gt.clean_X.data[-3:]
    A0 = W0 @ V.basis.T
    E0 = np.zeros_like(W0)
    k = int(round(frac * E0.size))
    E0.flat[rng.choice(E0.size, k, replace=False)] = rng.uniform(-2, 2, k)
    return V, A0, E0


def test_exact_row_space():
    V, A0, _ = setup_frame(0)
    res = sparse_project(A0 @ V.basis, V)
    assert res.converged
    np.testing.assert_allclose(res.A, A0, atol=1e-8)
    assert np.abs(res.E).max() < 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_sparse_recovery(seed):
    V, A0, E0 = setup_frame(seed)
    W = A0 @ V.basis + E0
    res = sparse_project(W, V)
    assert np.linalg.norm(res.A - A0) / np.linalg.norm(A0) < 1e-4
    eps = default_eps(res.E, W)
    np.testing.assert_array_equal(np.abs(res.E) > eps, E0 != 0)


def test_zero_frame():
    V, _, _ = setup_frame(1)
    res = sparse_project(np.zeros((3, 100)), V)
    assert not res.A.any() and not res.E.any()


def test_feasibility_and_row_space():
    V, A0, E0 = setup_frame(2)
    W = A0 @ V.basis + E0
    res = sparse_project(W, V)
    assert res.converged
    assert np.linalg.norm(W - res.A @ V.basis - res.E) / np.linalg.norm(W) <= 1e-7
    AV = res.A @ V.basis
    outside = AV - AV @ V.basis.T @ V.basis
    assert np.linalg.norm(outside) < 1e-10 * max(1.0, np.linalg.norm(AV))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 100), st.integers(0, 50))
def test_homogeneity(c, seed):
    V, A0, E0 = setup_frame(seed, m=40)
    W = A0 @ V.basis + E0
    a = sparse_project(W, V, tol=1e-10, max_iter=500)
    b = sparse_project(c * W, V, tol=1e-10, max_iter=500)
    assert np.linalg.norm(b.A - c * a.A) <= 1e-6 * np.linalg.norm(c * a.A)
    assert np.linalg.norm(b.E - c * a.E) <= 1e-6 * max(np.linalg.norm(c * a.E), np.linalg.norm(c * W))


def test_clean_matches_least_squares(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(60, 4)))
    V = ShapeBasis(Q.T)
    W = rng.normal(size=(3, 4)) @ V.basis
    res = sparse_project(W, V)
    ls = W @ V.basis.T @ V.basis
    assert np.linalg.norm(res.A @ V.basis - ls) <= 1e-6 * np.linalg.norm(ls)


def test_missing_columns():
    V, A0, E0 = setup_frame(3)
    W = A0 @ V.basis + E0
    W[:, :10] = np.nan
    res = sparse_project(W, V)
    assert np.linalg.norm(res.A - A0) / np.linalg.norm(A0) < 1e-4
    assert not res.E[:, :10].any()


def test_width_mismatch():
    V, A0, _ = setup_frame(4)
    with pytest.raises(ValueError):
        sparse_project(np.zeros((3, 99)), V)


def test_uncorrupted_set_examples():
    assert uncorrupted_set(np.zeros((3, 5)), 1e-6) == SupportSet.all(5)
    E = np.zeros((3, 4))
    E[1, 2] = 10e-6
    assert list(uncorrupted_set(E, 1e-6).indices) == [0, 1, 3]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.floats(0, 0.5), st.integers(0, 2**32 - 1))
def test_uncorrupted_set_brute_force(m, density, seed):
    rng = np.random.default_rng(seed)
    E = np.where(rng.random((3, m)) < density, rng.normal(size=(3, m)), 0.0)
    eps = 1e-3
    expected = [j for j in range(m) if all(abs(E[a, j]) <= eps for a in range(3))]
    assert list(uncorrupted_set(E, eps).indices) == expected


def test_faster_than_pcp():
    gt = generate(ScenarioConfig(frames=50, features=100, corrupt_frac=0.05, seed=5))
    t0 = time.perf_counter()
    dec = pcp(gt.observed_X)
    t_pcp = time.perf_counter() - t0
    V = shape_basis(dec.L)
    W = gt.observed_X.data[-3:]
    reps = 20
    t0 = time.perf_counter()
    for _ in range(reps):
        sparse_project(W, V)
    t_proj = (time.perf_counter() - t0) / reps
    assert t_proj < t_pcp / 10
