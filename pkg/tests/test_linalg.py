import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from labnet import linalg
from labnet.errors import InvalidArgument, RankDeficient, ShapeMismatch, SingularMatrix


def test_identity_and_diagonal():
    assert np.array_equal(linalg.solve(np.eye(3), [1, 2, 3]), [1, 2, 3])
    np.testing.assert_allclose(linalg.solve([[2, 0], [0, 4]], [2, 8]), [1, 2], rtol=0, atol=1e-15)


def test_round_trip_planted_solution(rng):
    for _ in range(20):
        a = rng.normal(size=(5, 5)) + 5 * np.eye(5)
        x = rng.normal(size=5)
        np.testing.assert_allclose(linalg.solve(a, a @ x), x, atol=1e-9)


def test_matrix_right_hand_side(rng):
    a = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    b = rng.normal(size=(4, 3))
    np.testing.assert_allclose(linalg.solve(a, b), np.linalg.solve(a, b), atol=1e-12)


def test_needs_pivoting():
    # zero leading entry: naive elimination would divide by zero
    a = np.array([[0.0, 1.0], [1.0, 1.0]])
    np.testing.assert_allclose(linalg.solve(a, [2.0, 3.0]), [1.0, 2.0])


def test_singular():
    with pytest.raises(SingularMatrix):
        linalg.solve([[1, 2], [2, 4]], [1, 2])
    with pytest.raises(SingularMatrix):
        linalg.solve(np.zeros((3, 3)), np.ones(3))


def test_shape_and_finiteness_checks():
    with pytest.raises(ShapeMismatch):
        linalg.solve(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ShapeMismatch):
        linalg.solve(np.eye(2), np.ones(3))
    with pytest.raises(InvalidArgument):
        linalg.solve([[1, np.nan], [0, 1]], [1, 1])


def test_lstsq_examples(rng):
    np.testing.assert_allclose(linalg.lstsq([[1], [1], [1]], [1, 2, 3]), [2.0])
    a = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    b = rng.normal(size=4)
    np.testing.assert_allclose(linalg.lstsq(a, b), linalg.solve(a, b), atol=1e-10)
    a = rng.normal(size=(10, 3))
    x = rng.normal(size=(3, 2))
    np.testing.assert_allclose(linalg.lstsq(a, a @ x), x, atol=1e-8)


def test_lstsq_matches_numpy(rng):
    a = rng.normal(size=(30, 6))
    b = rng.normal(size=(30, 2))
    np.testing.assert_allclose(linalg.lstsq(a, b), np.linalg.lstsq(a, b, rcond=None)[0], atol=1e-10)


def test_lstsq_rank_deficient():
    a = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(RankDeficient):
        linalg.lstsq(a, np.ones(3))
    with pytest.raises(ShapeMismatch):
        linalg.lstsq(np.ones((2, 3)), np.ones(2))


def well_conditioned(n, seed):
    r = np.random.default_rng(seed)
    q, _ = np.linalg.qr(r.normal(size=(n, n)))
    return q @ np.diag(r.uniform(0.1, 10, n)) @ q.T + r.normal(scale=0.01, size=(n, n))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_residual_bound(n, seed):
    a = well_conditioned(n, seed)
    b = np.random.default_rng(seed + 1).normal(size=n) * 100
    x = linalg.solve(a, b)
    assert np.abs(a @ x - b).max() <= 1e-9 * max(1.0, np.abs(b).max())


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_row_permutation_stable(n, seed):
    a = well_conditioned(n, seed)
    b = np.random.default_rng(seed + 1).normal(size=n)
    perm = np.random.default_rng(seed + 2).permutation(n)
    np.testing.assert_allclose(linalg.solve(a[perm], b[perm]), linalg.solve(a, b), rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10), st.integers(0, 2**32 - 1))
def test_lstsq_residual_orthogonal(n, extra, seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(n + extra, n))
    b = r.normal(size=(n + extra, 2))
    if np.linalg.cond(a) > 1e4:
        return
    x = linalg.lstsq(a, b)
    g = a.T @ (a @ x - b)
    assert np.abs(g).max() <= 1e-6 * max(1.0, np.abs(a.T @ b).max())
