"""Test matrix module."""
import numpy as np
import pytest

from neural_nmf import exception, matrix

pytestmark = pytest.mark.matrix


def test_as_matrix_column():
    """1-D input becomes a single column"""
    mat = matrix.as_matrix([1, 2, 3])
    assert mat.shape == (3, 1)
    assert mat.dtype == np.float64


@pytest.mark.parametrize('value,error', [
    (np.zeros((2, 2, 2)), exception.ShapeMismatch),
    ([[1.0, np.nan]], exception.ShapeMismatch),
    ([[1.0, -1.0]], exception.NegativeEntry),
])
def test_as_matrix_invalid(value, error):
    with pytest.raises(error):
        matrix.as_matrix(value, nonnegative=True)


def test_index_set():
    """None stands for all, out of range and unsorted indices are rejected"""
    assert matrix.index_set(None, 3) is None
    np.testing.assert_array_equal(matrix.index_set([0, 2], 3), [0, 2])
    assert matrix.index_set([], 3).size == 0
    with pytest.raises(exception.IndexOutOfRange):
        matrix.index_set([3], 3)
    with pytest.raises(exception.IndexOutOfRange):
        matrix.index_set([2, 1], 3)


def test_restrict():
    mat = np.arange(12.0).reshape(3, 4)
    sub = matrix.restrict(mat, [0, 2], [1, 3])
    np.testing.assert_array_equal(sub, [[1, 3], [9, 11]])
    sub[0, 0] = -1
    assert mat[0, 1] == 1


def test_restrict_empty():
    """Empty index set yields a matrix with a zero-length dimension"""
    assert matrix.restrict(np.ones((3, 4)), None, []).shape == (3, 0)


def test_restrict_out_of_range():
    with pytest.raises(exception.IndexOutOfRange):
        matrix.restrict(np.ones((2, 2)), None, [2])


@pytest.mark.parametrize('seed', range(5))
def test_scatter_restrict_round_trip(seed):
    """Scattering rows then restricting to them returns the source"""
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(7, 3, replace=False))
    src = rng.random((3, 4))
    full = matrix.scatter_rows(src, rows, 7)
    np.testing.assert_array_equal(matrix.restrict(full, rows), src)
    others = np.setdiff1d(np.arange(7), rows)
    assert not np.any(full[others])


def test_scatter_rows_mismatch():
    with pytest.raises(exception.ShapeMismatch):
        matrix.scatter_rows(np.ones((2, 2)), [0, 1, 2], 4)


@pytest.mark.parametrize('shape', [(5, 3), (3, 3), (2, 4)])
def test_pinv_full_rank(shape):
    """Pseudoinverse matches numpy on full rank input"""
    mat = np.random.default_rng(0).random(shape)
    np.testing.assert_allclose(
        matrix.pinv(mat), np.linalg.pinv(mat), atol=1e-12)


def test_pinv_left_inverse():
    mat = np.random.default_rng(1).random((6, 3))
    np.testing.assert_allclose(matrix.pinv(mat) @ mat, np.eye(3), atol=1e-12)


def test_pinv_empty():
    """Pseudoinverse of (r, 0) matrix is (0, r)"""
    assert matrix.pinv(np.zeros((4, 0))).shape == (0, 4)


def test_pinv_rank_deficient():
    mat = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(exception.RankDeficient):
        matrix.pinv(mat)
    truncated = matrix.pinv(mat, strict=False)
    np.testing.assert_allclose(truncated, np.linalg.pinv(mat), atol=1e-12)


def test_is_full_rank():
    assert matrix.is_full_rank(np.eye(3))
    assert not matrix.is_full_rank(np.ones((3, 2)))


def test_hadamard_mismatch():
    with pytest.raises(exception.ShapeMismatch):
        matrix.hadamard(np.ones((2, 2)), np.ones((2, 3)))


def test_support():
    np.testing.assert_array_equal(matrix.support([0.0, 2.0, 0.0, 1e-12]), [1, 3])
    np.testing.assert_array_equal(
        matrix.support([0.0, 2.0, 0.0, 1e-12], tol=1e-10), [1])


def test_relu_frobenius():
    mat = np.array([[-1.0, 3.0], [4.0, -2.0]])
    np.testing.assert_array_equal(matrix.relu(mat), [[0, 3], [4, 0]])
    assert matrix.frobenius(matrix.relu(mat)) == 5.0
