"""Evaluation metrics."""
import logging

import numpy as np

from neural_nmf import engine, exception
from neural_nmf.matrix import as_matrix, frobenius
from neural_nmf.synthetic import make_labels

_LG = logging.getLogger(__name__)


def recon_error(X, stack, ell=None):
    """Relative reconstruction error ``||X - A^(0)...A^(l) S^(l)|| / ||X||``.

    Parameters
    ----------
    X : array-like
        Data matrix.
    stack : :class:`FactorStack<neural_nmf.stack.FactorStack>`
    ell : int
        Layer. Defaults to the last one.

    Raises
    ------
    :class:`ShapeMismatch<neural_nmf.exception.ShapeMismatch>`
    """
    X = as_matrix(X, 'X')
    approx = stack.reconstruction(ell)
    if approx.shape != X.shape:
        raise exception.ShapeMismatch(
            'reconstruction %s, data %s' % (approx.shape, X.shape))
    norm = frobenius(X)
    if norm == 0:
        return 0.0 if frobenius(approx) == 0 else float('inf')
    return frobenius(X - approx) / norm


def class_accuracy(B, S_last, labels, eval_mask=None):
    """Fraction of columns whose predicted class matches the label.

    Column ``m`` is predicted as ``argmax_p (B S)[p, m]``; ties go to the
    lowest class index.

    Parameters
    ----------
    B : numpy.ndarray
        (P, k) classification matrix.
    S_last : numpy.ndarray
        (k, M) coefficients.
    labels : array-like of int
        True class of every column.
    eval_mask : array-like of bool
        Columns to score. All columns when omitted.

    Raises
    ------
    :class:`ShapeMismatch<neural_nmf.exception.ShapeMismatch>`
    """
    B = np.asarray(B, dtype=np.float64)
    S_last = np.asarray(S_last, dtype=np.float64)
    labels = np.asarray(labels).reshape(-1)
    if B.shape[1] != S_last.shape[0] or S_last.shape[1] != labels.size:
        raise exception.ShapeMismatch(
            'B: %s, S: %s, labels: %s' % (B.shape, S_last.shape, labels.shape))
    mask = (
        np.ones(labels.size, dtype=bool) if eval_mask is None
        else np.asarray(eval_mask, dtype=bool).reshape(-1))
    if mask.size != labels.size:
        raise exception.ShapeMismatch(
            'mask: %s, labels: %s' % (mask.shape, labels.shape))
    if not np.any(mask):
        return 0.0
    predicted = np.argmax(B @ S_last, axis=0)
    return float(np.mean(predicted[mask] == labels[mask]))


def evaluation_B(S, labels, n_classes=None, supervision=None):
    """Classification matrix used to score ``S``.

    ``(Z * Y) pinv(S)`` with the run's supervision when given, otherwise
    with every label revealed.
    """
    if supervision is None:
        supervision = make_labels(labels, 1.0, n_classes=n_classes)
    return engine.compute_B(supervision, S, strict=False)


def layer_report(X, stack, labels=None, n_classes=None, supervision=None):
    """Reconstruction error and accuracy at every layer.

    Returns
    -------
    list of dict
        One dict per layer with ``layer``, ``rank``, ``recon_error`` and,
        when labels are given, ``accuracy``.
    """
    report = []
    for ell in range(stack.n_layers):
        entry = {
            'layer': ell,
            'rank': stack.ranks[ell],
            'recon_error': recon_error(X, stack, ell),
        }
        if labels is not None:
            S = stack.S_list[ell]
            B = evaluation_B(S, labels, n_classes, supervision)
            entry['accuracy'] = class_accuracy(B, S, labels)
        report.append(entry)
    return report


def top_keywords(stack, vocabulary, ell, n=10):
    """Terms with the largest weights in every column of ``A^(0)...A^(l)``.

    Returns
    -------
    list of list of str
        One list of ``n`` terms per topic at layer ``ell``.
    """
    P = stack.product(ell)
    if P.shape[0] != len(vocabulary):
        raise exception.ShapeMismatch(
            '%d rows, %d terms' % (P.shape[0], len(vocabulary)))
    order = np.argsort(-np.abs(P), axis=0, kind='stable')[:n]
    return [[vocabulary[i] for i in order[:, t]] for t in range(P.shape[1])]
