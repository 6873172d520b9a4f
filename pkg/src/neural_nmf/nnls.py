"""Exact-support nonnegative least squares.

Computes ``q(A, X) = argmin_{S >= 0} ||X - A S||`` column by column with the
Lawson-Hanson active-set method, then snaps every column onto its support
``T`` so that ``S[T, m] = pinv(A[:, T]) @ X[:, m]`` holds to machine precision
and entries off ``T`` are exactly zero. The supports are returned alongside
the coefficients because the backpropagation engine differentiates through
them.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.optimize

from neural_nmf import exception
from neural_nmf.matrix import RANK_TOL, as_matrix, is_full_rank, pinv

_LG = logging.getLogger(__name__)

KKT_TOL = 1e-8
SUPPORT_TOL = 1e-10


@dataclass
class NnlsSolution:
    """Solution of a column-wise NNLS problem.

    :ivar numpy.ndarray coefficients: (k, M) nonnegative coefficients.
    :ivar list supports: M index arrays, the support of each column.
    :ivar numpy.ndarray kkt_residuals: (M,) scaled KKT residual per column.
    """
    coefficients: np.ndarray
    supports: List[np.ndarray] = field(default_factory=list)
    kkt_residuals: np.ndarray = None

    @property
    def mask(self):
        """Boolean (k, M) support indicator."""
        return self.coefficients > 0


def support_groups(mask):
    """Group columns sharing the same support pattern.

    Parameters
    ----------
    mask : numpy.ndarray
        Boolean (k, M) support indicator.

    Yields
    ------
    tuple of numpy.ndarray
        ``(support, columns)`` pairs in ascending order of pattern.
    """
    if mask.shape[1] == 0:
        return
    patterns, inverse = np.unique(mask.T, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    for i, pattern in enumerate(patterns):
        yield np.flatnonzero(pattern), np.flatnonzero(inverse == i)


def _kkt_scale(A, X):
    return np.maximum(1.0, np.linalg.norm(A) * np.linalg.norm(X, axis=0))


def _kkt_violation(A, X, S):
    grad = A.T @ (A @ S - X)
    return np.max(np.stack([
        np.maximum(-S, 0.0),
        np.maximum(-grad, 0.0),
        np.abs(S * grad),
    ]), axis=(0, 1)) if S.size else np.zeros(S.shape[1])


def kkt_check(A, x, s, tol=KKT_TOL):
    """Check the KKT optimality conditions of ``min_{s >= 0} ||x - A s||``.

    Parameters
    ----------
    A : numpy.ndarray
        (n, k) design matrix.
    x : numpy.ndarray
        Target vector of length n.
    s : numpy.ndarray
        Candidate solution of length k.
    tol : float
        Absolute tolerance.

    Returns
    -------
    tuple of (bool, float)
        Whether the conditions hold, and the residual, i.e. the largest
        violation among primal feasibility ``s >= 0``, dual feasibility
        ``A^T (A s - x) >= 0`` and complementary slackness.

    Raises
    ------
    :class:`ShapeMismatch<neural_nmf.exception.ShapeMismatch>`
    """
    A = as_matrix(A, 'A')
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    if x.size != A.shape[0] or s.size != A.shape[1]:
        raise exception.ShapeMismatch(
            'A: %s, x: %s, s: %s' % (A.shape, x.shape, s.shape))
    residual = float(_kkt_violation(A, x[:, None], s[:, None])[0])
    return residual <= tol, residual


def _solve_column(A, x, maxiter):
    if not np.any(x):
        return np.zeros(A.shape[1])
    try:
        coef, _ = scipy.optimize.nnls(A, x, maxiter=maxiter)
    except RuntimeError as error:
        raise exception.NonConvergence(
            'Active set iterations exceeded %d; %s' % (maxiter, error)
        ) from None
    return coef


def _snap_to_support(A, X, S, support_tol, rank_tol):
    """Recompute coefficients exactly on their support.

    Entries that fall to ``support_tol`` or below after the restricted solve
    are removed from the support and the column is solved again.
    """
    mask = S > support_tol
    out = np.zeros_like(S)
    pending = np.arange(S.shape[1])
    for _ in range(A.shape[1] + 1):
        if pending.size == 0:
            break
        unstable = []
        for supp, cols in support_groups(mask[:, pending]):
            cols = pending[cols]
            if supp.size == 0:
                out[:, cols] = 0.0
                continue
            coef = pinv(A[:, supp], rank_tol=rank_tol) @ X[:, cols]
            out[:, cols] = 0.0
            out[np.ix_(supp, cols)] = coef
            dropped = coef <= support_tol
            if np.any(dropped):
                bad_cols = np.any(dropped, axis=0)
                for row, col in zip(*np.nonzero(dropped)):
                    mask[supp[row], cols[col]] = False
                unstable.append(cols[bad_cols])
        pending = (
            np.unique(np.concatenate(unstable)) if unstable
            else np.zeros(0, dtype=np.int64))
    out[~mask] = 0.0
    return out, mask


def nnls_matrix(
        A, X, tol=KKT_TOL, support_tol=SUPPORT_TOL, rank_tol=RANK_TOL,
        n_jobs=1):
    """Solve ``q(A, X)`` column by column.

    Parameters
    ----------
    A : array-like
        (n, k) design matrix with full column rank.
    X : array-like
        (n, M) nonnegative data.
    tol : float
        KKT tolerance, relative to ``max(1, ||A|| ||x_m||)`` per column.
    support_tol : float
        Coefficients at or below this value are set to exactly zero.
    rank_tol : float
        Relative singular value threshold for the full rank check.
    n_jobs : int
        Number of threads solving columns concurrently. The result does not
        depend on it.

    Returns
    -------
    :class:`NnlsSolution`

    Raises
    ------
    :class:`RankDeficient<neural_nmf.exception.RankDeficient>`
        ``A`` does not have full column rank.
    :class:`NonConvergence<neural_nmf.exception.NonConvergence>`
        The active set method exceeded ``3 k`` iterations, or the
        solution does not satisfy the KKT conditions within ``tol``.
    """
    A = as_matrix(A, 'A')
    X = as_matrix(X, 'X', nonnegative=True)
    if A.shape[0] != X.shape[0]:
        raise exception.ShapeMismatch(
            'A has %d rows, X has %d rows' % (A.shape[0], X.shape[0]))
    if A.shape[1] > A.shape[0] or not is_full_rank(A, rank_tol):
        raise exception.RankDeficient(
            'design matrix of shape %s does not have full column rank'
            % (A.shape,))

    maxiter = 3 * A.shape[1]
    columns = [X[:, m] for m in range(X.shape[1])]
    if n_jobs > 1 and len(columns) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            raw = list(pool.map(
                lambda x: _solve_column(A, x, maxiter), columns))
    else:
        raw = [_solve_column(A, x, maxiter) for x in columns]
    raw = np.stack(raw, axis=1) if raw else np.zeros((A.shape[1], 0))

    coef, mask = _snap_to_support(A, X, raw, support_tol, rank_tol)
    residuals = _kkt_violation(A, X, coef) / _kkt_scale(A, X)
    failed = np.flatnonzero(residuals > tol)
    if failed.size:
        raise exception.NonConvergence(
            'KKT conditions violated at columns %s (max residual %g > %g)'
            % (failed.tolist(), residuals.max(), tol))
    supports = [np.flatnonzero(mask[:, m]) for m in range(mask.shape[1])]
    _LG.debug(
        'NNLS %s x %s: %d distinct supports, max KKT residual %g',
        A.shape, X.shape, len(set(tuple(s) for s in supports)),
        residuals.max() if residuals.size else 0.0)
    return NnlsSolution(
        coefficients=coef, supports=supports, kkt_residuals=residuals)


def nnls_column(A, x, tol=KKT_TOL, **kwargs):
    """Solve ``q(A, x)`` for a single vector.

    See :func:`nnls_matrix` for parameters.

    Returns
    -------
    tuple of numpy.ndarray
        Coefficient vector ``s`` and its support ``T``.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    sol = nnls_matrix(A, x, tol=tol, **kwargs)
    return sol.coefficients[:, 0], sol.supports[0]
