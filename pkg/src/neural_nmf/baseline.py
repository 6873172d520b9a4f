"""Multiplicative update NMF, semisupervised NMF and hierarchical NMF.

These serve as comparison baselines and as the warm start of Neural NMF.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from neural_nmf import exception
from neural_nmf.matrix import as_matrix
from neural_nmf.stack import FactorStack, LayerSpec, SupervisionData

_LG = logging.getLogger(__name__)

EPS = 1e-12
DEFAULT_ITERS = 1000


@dataclass
class NmfResult:
    """Result of a multiplicative update run.

    :ivar numpy.ndarray A: (N, k) dictionary.
    :ivar numpy.ndarray S: (k, M) coefficients.
    :ivar numpy.ndarray B: (P, k) classification matrix, SSNMF only.
    :ivar list objective_trace: Objective value after every iteration.
    """
    A: np.ndarray
    S: np.ndarray
    B: Optional[np.ndarray] = None
    objective_trace: List[float] = field(default_factory=list)


def _check_rank(shape, k):
    if not 0 < k < min(shape):
        raise exception.InvalidRank(
            'Rank must satisfy 0 < k < min(N, M) = %d. Found %d'
            % (min(shape), k))


def _init_factor(rng, shape, data, k):
    scale = np.sqrt(data.mean() / k) if data.size else 0.0
    return rng.random(shape) * scale


def _update(factor, numerator, denominator):
    return factor * numerator / np.maximum(denominator, EPS)


def nmf_mu(X, k, iters=DEFAULT_ITERS, seed=0):
    """Frobenius NMF by Lee-Seung multiplicative updates.

    Minimizes ``||X - A S||_F^2`` over ``A, S >= 0``.

    Parameters
    ----------
    X : array-like
        (N, M) nonnegative data.
    k : int
        Rank, ``0 < k < min(N, M)``.
    iters : int
        Number of iterations.
    seed : int
        Seed of the uniform initialization, scaled by ``sqrt(mean(X) / k)``.

    Returns
    -------
    :class:`NmfResult`

    Raises
    ------
    :class:`InvalidRank<neural_nmf.exception.InvalidRank>`
    """
    X = as_matrix(X, 'X', nonnegative=True)
    _check_rank(X.shape, k)
    rng = np.random.default_rng(seed)
    A = _init_factor(rng, (X.shape[0], k), X, k)
    S = _init_factor(rng, (k, X.shape[1]), X, k)

    trace = []
    for i in range(iters):
        S = _update(S, A.T @ X, A.T @ A @ S)
        A = _update(A, X @ S.T, A @ (S @ S.T))
        trace.append(float(np.sum((X - A @ S) ** 2)))
        _LG.debug('NMF iteration %d: %g', i, trace[-1])
    return NmfResult(A=A, S=S, objective_trace=trace)


def ssnmf_objective(X, supervision, A, S, B):
    """``||W * (X - A S)||^2 + lam ||Z * (Y - B S)||^2``."""
    W = supervision.data_mask(X.shape)
    recon = np.sum((W * (X - A @ S)) ** 2)
    classif = np.sum((supervision.Z * (supervision.Y - B @ S)) ** 2)
    return float(recon + supervision.lam * classif)


def ssnmf_mu(X, supervision, k, iters=DEFAULT_ITERS, seed=0):
    """Semisupervised NMF by multiplicative updates.

    Minimizes ``||W * (X - A S)||^2 + lam ||Z * (Y - B S)||^2`` over
    nonnegative ``A``, ``S`` and ``B``.

    Parameters
    ----------
    X : array-like
        (N, M) nonnegative data.
    supervision : :class:`SupervisionData<neural_nmf.stack.SupervisionData>`
        Labels, indicators and weight.
    k : int
        Rank.
    iters : int
        Number of iterations.
    seed : int
        Seed. ``A`` and ``S`` are drawn exactly as in :func:`nmf_mu`.

    Returns
    -------
    :class:`NmfResult`
        With ``B`` set.

    Raises
    ------
    :class:`InvalidRank<neural_nmf.exception.InvalidRank>`
    :class:`ShapeMismatch<neural_nmf.exception.ShapeMismatch>`
    """
    X = as_matrix(X, 'X', nonnegative=True)
    _check_rank(X.shape, k)
    if supervision.Y.shape[1] != X.shape[1]:
        raise exception.ShapeMismatch(
            'Y has %d columns, X has %d columns'
            % (supervision.Y.shape[1], X.shape[1]))
    W = supervision.data_mask(X.shape)
    Y, Z, lam = supervision.Y, supervision.Z, supervision.lam

    rng = np.random.default_rng(seed)
    A = _init_factor(rng, (X.shape[0], k), X, k)
    S = _init_factor(rng, (k, X.shape[1]), X, k)
    B = _init_factor(rng, (Y.shape[0], k), Y, k)
    WX, ZY = W * X, Z * Y

    trace = []
    for i in range(iters):
        S = _update(
            S,
            A.T @ WX + lam * (B.T @ ZY),
            A.T @ (W * (A @ S)) + lam * (B.T @ (Z * (B @ S))))
        A = _update(A, WX @ S.T, (W * (A @ S)) @ S.T)
        B = _update(B, ZY @ S.T, (Z * (B @ S)) @ S.T)
        trace.append(ssnmf_objective(X, supervision, A, S, B))
        _LG.debug('SSNMF iteration %d: %g', i, trace[-1])
    return NmfResult(A=A, S=S, B=B, objective_trace=trace)


def hnmf(X, layers, iters=DEFAULT_ITERS, seed=0, supervision=None):
    """Sequential hierarchical NMF.

    Layer 0 factors ``X`` and layer ``l`` factors ``S^(l-1)``. When
    supervision is given, the last layer is factored with :func:`ssnmf_mu`.
    Layer ``l`` is seeded with ``seed + l``.

    Parameters
    ----------
    X : array-like
        (N, M) nonnegative data.
    layers : :class:`LayerSpec<neural_nmf.stack.LayerSpec>` or sequence of int
    iters : int
        Iterations per layer.
    seed : int
    supervision : :class:`SupervisionData<neural_nmf.stack.SupervisionData>`
        Optional. Its data indicator ``W`` only applies when the last layer
        is also the first one, since deeper layers do not factor ``X``.

    Returns
    -------
    :class:`FactorStack<neural_nmf.stack.FactorStack>`
    """
    X = as_matrix(X, 'X', nonnegative=True)
    if not isinstance(layers, LayerSpec):
        layers = LayerSpec(tuple(layers))
    layers.validate(X.shape[0])

    A_list, S_list, traces, B = [], [], [], None
    data = X
    last = len(layers) - 1
    for ell, k in enumerate(layers.ranks):
        if supervision is not None and ell == last:
            sup = supervision
            if ell > 0 and supervision.W is not None:
                sup = SupervisionData(
                    Y=supervision.Y, Z=supervision.Z, lam=supervision.lam)
            result = ssnmf_mu(data, sup, k, iters=iters, seed=seed + ell)
            B = result.B
        else:
            result = nmf_mu(data, k, iters=iters, seed=seed + ell)
        _LG.info(
            'HNMF layer %d (k=%d): objective %g',
            ell, k, result.objective_trace[-1] if result.objective_trace
            else float('nan'))
        A_list.append(result.A)
        S_list.append(result.S)
        traces.append(result.objective_trace)
        data = result.S
    return FactorStack(
        A_list=A_list, S_list=S_list, X=X, B=B, objective_traces=traces)
