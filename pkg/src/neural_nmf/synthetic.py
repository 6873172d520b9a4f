"""Synthetic hierarchical block data and label construction."""
import logging
from dataclasses import dataclass

import numpy as np

from neural_nmf import exception
from neural_nmf.stack import SupervisionData

_LG = logging.getLogger(__name__)

# Nested block layout. Every coarse block splits into mid blocks, every mid
# block into fine blocks. Fine blocks partition rows and columns and sit on
# the diagonal. Intensities add up level by level; the centered part of the
# uniform(0, 1) noise is a few percent of the Frobenius norm of the data.
BLOCK_SPEC = {
    'shape': [90, 87],
    'levels': [
        {
            'name': 'coarse',
            'intensity': 5.0,
            'rows': [45, 45],
            'cols': [44, 43],
        },
        {
            'name': 'mid',
            'intensity': 5.0,
            'rows': [20, 25, 22, 23],
            'cols': [19, 25, 20, 23],
            'parent': [0, 0, 1, 1],
        },
        {
            'name': 'fine',
            'intensity': 10.0,
            'rows': [8, 12, 10, 15, 11, 11, 7, 9, 7],
            'cols': [9, 10, 13, 12, 8, 12, 6, 10, 7],
            'parent': [0, 0, 1, 1, 2, 2, 3, 3, 3],
        },
    ],
}


@dataclass
class SyntheticDataset:
    """Synthetic hierarchical dataset.

    :ivar numpy.ndarray X: (90, 87) nonnegative data.
    :ivar numpy.ndarray labels: Fine block index of every column.
    :ivar dict block_spec: The block layout used to build ``X``.
    """
    X: np.ndarray
    labels: np.ndarray
    block_spec: dict


def _bounds(sizes):
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return list(zip(edges[:-1], edges[1:]))


def _block_indicators(sizes, total):
    out = np.zeros((total, len(sizes)))
    for b, (start, stop) in enumerate(_bounds(sizes)):
        out[start:stop, b] = 1.0
    return out


def _ancestors(spec):
    """For every fine block, its block index at every level."""
    levels = spec['levels']
    chain = [list(range(len(levels[-1]['rows'])))]
    for level in reversed(levels[1:]):
        chain.append([level['parent'][b] for b in chain[-1]])
    return list(reversed(chain))


def block_factors(spec=None):
    """Exact nonnegative rank-9 factorization of the noise-free data.

    Returns
    -------
    tuple of numpy.ndarray
        ``A`` of shape (N, n_fine) whose columns are the distinct column
        patterns, and ``S`` of shape (n_fine, M), the column indicators.
    """
    spec = spec or BLOCK_SPEC
    n_rows, n_cols = spec['shape']
    ancestors = _ancestors(spec)
    row_ind = [
        _block_indicators(level['rows'], n_rows) for level in spec['levels']]
    A = np.zeros((n_rows, len(ancestors[-1])))
    for f in range(A.shape[1]):
        for lvl, level in enumerate(spec['levels']):
            A[:, f] += level['intensity'] * row_ind[lvl][:, ancestors[lvl][f]]
    S = _block_indicators(spec['levels'][-1]['cols'], n_cols).T
    return A, S


def synth_hier(seed=0, noise=True, spec=None):
    """Generate the synthetic hierarchical dataset.

    Increasingly smaller and more intense blocks are overlaid along the
    diagonal of two large blocks, then uniform(0, 1) noise is added to every
    entry. Columns are labeled by their fine (highest intensity) block.

    Parameters
    ----------
    seed : int
        Seed of the noise. Labels do not depend on it.
    noise : bool
        Add the noise.
    spec : dict
        Block layout. Defaults to :data:`BLOCK_SPEC`.

    Returns
    -------
    :class:`SyntheticDataset`
    """
    spec = spec or BLOCK_SPEC
    n_rows, n_cols = spec['shape']
    X = np.zeros((n_rows, n_cols))
    for level in spec['levels']:
        for (r0, r1), (c0, c1) in zip(
                _bounds(level['rows']), _bounds(level['cols'])):
            X[r0:r1, c0:c1] += level['intensity']
    fine = spec['levels'][-1]['cols']
    labels = np.repeat(np.arange(len(fine)), fine)
    if noise:
        X = X + np.random.default_rng(seed).random(X.shape)
    _LG.debug('Generated %s synthetic data (seed=%d, noise=%s)',
              X.shape, seed, noise)
    return SyntheticDataset(X=X, labels=labels, block_spec=spec)


def make_labels(
        labels, known_fraction, seed=0, n_classes=None, n_rows=None,
        lam=1.0):
    """Build supervision from class indices.

    Parameters
    ----------
    labels : array-like of int
        Class index of every column.
    known_fraction : float
        Fraction of columns whose label is revealed.
        ``floor(known_fraction * M)`` columns are sampled uniformly.
    seed : int
        Seed of the sampling.
    n_classes : int
        Number of classes P. Defaults to ``max(labels) + 1``.
    n_rows : int
        If given, ``W`` is an all-ones ``(n_rows, M)`` matrix. Otherwise
        ``W`` is left unset, which is treated as all ones.
    lam : float
        Weight of the classification term.

    Returns
    -------
    :class:`SupervisionData<neural_nmf.stack.SupervisionData>`

    Raises
    ------
    :class:`InvalidFraction<neural_nmf.exception.InvalidFraction>`
    """
    if not 0 <= known_fraction <= 1:
        raise exception.InvalidFraction(
            '`known_fraction` must be in [0, 1]. Found %s' % known_fraction)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n_cols = labels.size
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise exception.IndexOutOfRange(
            'labels must be in [0, %d)' % n_classes)

    Y = np.zeros((n_classes, n_cols))
    Y[labels, np.arange(n_cols)] = 1.0
    n_known = int(np.floor(known_fraction * n_cols + 1e-9))
    known = np.random.default_rng(seed).choice(n_cols, n_known, replace=False)
    Z = np.zeros((n_classes, n_cols))
    Z[:, known] = 1.0
    W = None if n_rows is None else np.ones((n_rows, n_cols))
    return SupervisionData(Y=Y, Z=Z, W=W, lam=lam)
