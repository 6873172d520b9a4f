"""Dense matrix helpers shared by the solvers and the backpropagation engine.

Matrices are 2-D ``float64`` :class:`numpy.ndarray` objects and index sets are
strictly increasing 1-D ``int64`` arrays. ``None`` in place of an index set
stands for "all positions". Every function returns a new array and never
modifies its inputs.
"""
import logging

import numpy as np

from neural_nmf import exception

_LG = logging.getLogger(__name__)

RANK_TOL = 1e-10


def as_matrix(value, name='matrix', nonnegative=False):
    """Convert input to 2-D float64 array and validate it.

    Parameters
    ----------
    value : array-like
        Matrix data. 1-D input is treated as a single column.
    name : str
        Name used in error messages.
    nonnegative : bool
        When True, reject matrices with negative entries.

    Returns
    -------
    numpy.ndarray
        2-D float64 copy of the input.

    Raises
    ------
    :class:`ShapeMismatch<neural_nmf.exception.ShapeMismatch>`
        Input has more than 2 dimensions or contains non-finite values.
    :class:`NegativeEntry<neural_nmf.exception.NegativeEntry>`
        ``nonnegative`` is set and the input has a negative entry.
    """
    mat = np.array(value, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat.reshape(-1, 1)
    if mat.ndim != 2:
        raise exception.ShapeMismatch(
            '`%s` must be 2-D. Found shape %s' % (name, mat.shape))
    if not np.all(np.isfinite(mat)):
        raise exception.ShapeMismatch(
            '`%s` contains non-finite values.' % name)
    if nonnegative and mat.size and mat.min() < 0:
        raise exception.NegativeEntry(
            '`%s` has minimum value %g' % (name, mat.min()))
    return mat


def index_set(indices, universe):
    """Validate and normalize an index set.

    Parameters
    ----------
    indices : array-like of int or None
        Zero-based positions. ``None`` means all positions.
    universe : int
        Size of the indexed dimension.

    Returns
    -------
    numpy.ndarray or None
        Strictly increasing int64 array, or None if ``indices`` is None.

    Raises
    ------
    :class:`IndexOutOfRange<neural_nmf.exception.IndexOutOfRange>`
        An index is outside of ``[0, universe)``, or indices are not
        strictly increasing.
    """
    if indices is None:
        return None
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= universe):
        raise exception.IndexOutOfRange(
            '%s not in [0, %d)' % (idx.tolist(), universe))
    if idx.size > 1 and np.any(np.diff(idx) <= 0):
        raise exception.IndexOutOfRange(
            '%s is not strictly increasing' % idx.tolist())
    return idx


def support(vector, tol=0.0):
    """Index set of the entries strictly greater than ``tol``."""
    return np.flatnonzero(np.asarray(vector) > tol).astype(np.int64)


def singular_values(mat):
    """Singular values in descending order, empty for empty matrices."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.size == 0:
        return np.zeros(0)
    return np.linalg.svd(mat, compute_uv=False)


def is_full_rank(mat, rank_tol=RANK_TOL):
    """True if the smallest singular value exceeds ``rank_tol`` x largest."""
    sv = singular_values(mat)
    if sv.size == 0:
        return True
    return bool(sv[-1] > rank_tol * sv[0])


def pinv(mat, rank_tol=RANK_TOL, strict=True):
    """Moore-Penrose pseudoinverse computed from the SVD.

    Parameters
    ----------
    mat : numpy.ndarray
        Matrix of shape (r, c). A matrix with a zero-length dimension
        yields the zero matrix of shape (c, r).
    rank_tol : float
        Relative threshold on singular values.
    strict : bool
        If True, raise when ``mat`` does not have full rank. If False,
        singular values at or below the threshold are truncated.

    Returns
    -------
    numpy.ndarray
        Pseudoinverse of shape (c, r).

    Raises
    ------
    :class:`RankDeficient<neural_nmf.exception.RankDeficient>`
        ``strict`` is set and the smallest singular value is at or below
        ``rank_tol`` times the largest one.
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise exception.ShapeMismatch(
            'pinv expects 2-D input. Found %s' % (mat.shape,))
    if mat.size == 0:
        return np.zeros((mat.shape[1], mat.shape[0]))
    u, sv, vt = np.linalg.svd(mat, full_matrices=False)
    cutoff = rank_tol * sv[0]
    keep = sv > cutoff
    if not np.all(keep):
        if strict:
            raise exception.RankDeficient(
                'smallest singular value %g <= %g (shape %s)'
                % (sv[-1], cutoff, mat.shape))
        _LG.debug(
            'Truncating %d of %d singular values.',
            np.count_nonzero(~keep), sv.size)
    return (vt[keep].T / sv[keep]) @ u[:, keep].T


def restrict(mat, rows=None, cols=None):
    """Submatrix ``mat[rows, cols]``, always a copy.

    Raises
    ------
    :class:`IndexOutOfRange<neural_nmf.exception.IndexOutOfRange>`
        Index sets are not valid for the shape of ``mat``.
    """
    mat = np.asarray(mat, dtype=np.float64)
    rows = index_set(rows, mat.shape[0])
    cols = index_set(cols, mat.shape[1])
    if rows is None:
        rows = np.arange(mat.shape[0])
    if cols is None:
        cols = np.arange(mat.shape[1])
    return mat[np.ix_(rows, cols)].copy()


def scatter_rows(src, rows, n_rows):
    """Embed ``src`` at positions ``rows`` of a zero matrix with ``n_rows`` rows.

    Inverse of :func:`restrict` along rows. 1-D ``src`` is scattered into a
    1-D result.

    Raises
    ------
    :class:`ShapeMismatch<neural_nmf.exception.ShapeMismatch>`
        The number of rows of ``src`` differs from the size of ``rows``.
    """
    src = np.asarray(src, dtype=np.float64)
    rows = index_set(rows, n_rows)
    if rows is None:
        rows = np.arange(n_rows)
    if src.shape[0] != rows.size:
        raise exception.ShapeMismatch(
            'source has %d rows but index set has %d entries'
            % (src.shape[0], rows.size))
    out = np.zeros((n_rows,) + src.shape[1:])
    out[rows] = src
    return out


def frobenius(mat):
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(mat, dtype=np.float64)))


def hadamard(lhs, rhs):
    """Elementwise product of two matrices of identical shape."""
    lhs = np.asarray(lhs, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if lhs.shape != rhs.shape:
        raise exception.ShapeMismatch(
            'hadamard of %s and %s' % (lhs.shape, rhs.shape))
    return lhs * rhs


def relu(mat):
    """Clamp negative entries to zero."""
    return np.maximum(np.asarray(mat, dtype=np.float64), 0.0)
