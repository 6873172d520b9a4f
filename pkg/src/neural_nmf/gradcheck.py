"""Finite difference oracle for the analytic Neural NMF gradients."""
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from neural_nmf import engine
from neural_nmf.matrix import as_matrix
from neural_nmf.stack import GradientStack

_LG = logging.getLogger(__name__)

DEFAULT_H = 1e-6
DEFAULT_RTOL = 1e-5
DEFAULT_PROBES = 200
CHECK_KKT_TOL = 1e-10


@dataclass
class GradReport:
    """Comparison of analytic and finite difference gradients.

    :ivar list max_abs_error: Per layer maximum of ``|a - n|``.
    :ivar list max_rel_error: Per layer maximum of ``|a - n| / (1 + |n|)``.
    :ivar list compared: Per layer number of stable probes compared.
    :ivar list skipped: Per layer number of support-unstable probes.
    :ivar float rtol: Tolerance on the relative error.
    :ivar list flagged: ``(layer, row, col, analytic, numeric)`` of every
        compared entry whose relative error exceeds ``rtol``.
    """
    max_abs_error: List[float]
    max_rel_error: List[float]
    compared: List[int]
    skipped: List[int]
    rtol: float
    flagged: List[Tuple[int, int, int, float, float]] = field(
        default_factory=list)

    @property
    def total(self):
        return sum(self.compared) + sum(self.skipped)

    @property
    def stable_fraction(self):
        return sum(self.compared) / self.total if self.total else 1.0

    @property
    def passed(self):
        """False when no probe was compared."""
        return sum(self.compared) > 0 and all(
            err <= self.rtol for err in self.max_rel_error)

    def to_dict(self):
        return {
            'passed': self.passed,
            'rtol': self.rtol,
            'max_abs_error': self.max_abs_error,
            'max_rel_error': self.max_rel_error,
            'compared': self.compared,
            'skipped': self.skipped,
            'stable_fraction': self.stable_fraction,
            'flagged': [list(f) for f in self.flagged],
        }


def random_instance(seed, rows=12, cols=10, ranks=(5, 3)):
    """Random nonnegative data and A matrices.

    Returns
    -------
    tuple
        ``X`` of shape ``(rows, cols)`` and the list of A matrices.
    """
    rng = np.random.default_rng(seed)
    X = rng.random((rows, cols))
    A_list, prev = [], rows
    for k in ranks:
        A_list.append(rng.random((prev, k)))
        prev = k
    return X, A_list


def _probe_masks(A_list, probes, rng):
    masks = []
    for A in A_list:
        mask = np.zeros(A.shape, dtype=bool)
        if probes is None or probes >= A.size:
            mask[:] = True
        else:
            mask.flat[np.sort(rng.choice(A.size, probes, replace=False))] = True
        masks.append(mask)
    return masks


def _evaluate(X, A_list, loss, B, kkt_tol):
    stack = engine.forward(A_list, X, tol=kkt_tol)
    return engine.loss_eval(stack, loss, B=B).value, stack.masks


def _base_B(X, A_list, loss, kkt_tol):
    if not loss.classifies:
        return None
    stack = engine.forward(A_list, X, tol=kkt_tol)
    return engine.compute_B(
        loss.supervision, stack.S_list[-1], strict=False, known_only=True)


def finite_diff_loss_grad(
        X, A_list, loss, h=DEFAULT_H, probes=None, seed=0, B=None,
        kkt_tol=CHECK_KKT_TOL):
    """Central difference gradient of the loss with respect to the A matrices.

    Each probed entry is perturbed by ``+h`` and ``-h`` and the forward pass
    is re-run. Probes whose two evaluations end up with different supports
    at any layer or column are marked unstable and left as NaN.

    Parameters
    ----------
    X : array-like
        Data matrix.
    A_list : list of array-like
        Point at which the gradient is taken.
    loss : :class:`LossSpec<neural_nmf.stack.LossSpec>`
    h : float
        Step.
    probes : int or None
        Number of randomly sampled entries per layer. None probes all.
    seed : int
        Seed of the probe sampling.
    B : numpy.ndarray
        Classification matrix held fixed across probes. Computed at the
        base point when omitted.

    Returns
    -------
    :class:`GradientStack<neural_nmf.stack.GradientStack>`
        With ``probed`` and ``stable`` masks. Entries that were not compared
        are NaN.
    """
    if h <= 0:
        raise ValueError('`h` must be positive. Found %s' % h)
    X = as_matrix(X, 'X', nonnegative=True)
    A_list = [as_matrix(A, 'A') for A in A_list]
    if B is None:
        B = _base_B(X, A_list, loss, kkt_tol)
    probed = _probe_masks(A_list, probes, np.random.default_rng(seed))

    grads, stable = [], []
    for ell, A in enumerate(A_list):
        grad = np.full(A.shape, np.nan)
        ok = np.zeros(A.shape, dtype=bool)
        for i, j in zip(*np.nonzero(probed[ell])):
            values, masks = [], []
            for sign in (1.0, -1.0):
                perturbed = list(A_list)
                perturbed[ell] = A.copy()
                perturbed[ell][i, j] += sign * h
                value, mask = _evaluate(X, perturbed, loss, B, kkt_tol)
                values.append(value)
                masks.append(mask)
            if all(np.array_equal(p, m) for p, m in zip(*masks)):
                grad[i, j] = (values[0] - values[1]) / (2 * h)
                ok[i, j] = True
        n_unstable = int(np.count_nonzero(probed[ell] & ~ok))
        if n_unstable:
            _LG.debug('Layer %d: %d unstable probes', ell, n_unstable)
        grads.append(grad)
        stable.append(ok)
    return GradientStack(dA_list=grads, probed=probed, stable=stable)


def compare(analytic, numeric, rtol=DEFAULT_RTOL):
    """Compare two gradients entrywise on the stable probes of ``numeric``.

    ``numeric`` without probe masks is compared on every entry.

    Returns
    -------
    :class:`GradReport`
    """
    report = GradReport([], [], [], [], rtol)
    for ell, (a, n) in enumerate(zip(analytic.dA_list, numeric.dA_list)):
        probed = (
            numeric.probed[ell] if numeric.probed is not None
            else np.ones(n.shape, dtype=bool))
        stable = (
            numeric.stable[ell] if numeric.stable is not None else probed)
        abs_err = np.abs(a - n)[stable]
        rel_err = abs_err / (1 + np.abs(n[stable]))
        report.max_abs_error.append(float(abs_err.max()) if abs_err.size else 0.0)
        report.max_rel_error.append(float(rel_err.max()) if rel_err.size else 0.0)
        report.compared.append(int(np.count_nonzero(stable)))
        report.skipped.append(int(np.count_nonzero(probed & ~stable)))
        for idx in np.flatnonzero(rel_err > rtol):
            i, j = [int(v) for v in np.argwhere(stable)[idx]]
            report.flagged.append(
                (ell, i, j, float(a[i, j]), float(n[i, j])))
    return report


def check(
        X, A_list, loss, h=DEFAULT_H, rtol=DEFAULT_RTOL, probes=None,
        seed=0, analytic=None, kkt_tol=CHECK_KKT_TOL):
    """Check :func:`grad_A<neural_nmf.engine.grad_A>` against finite differences.

    Parameters
    ----------
    analytic : :class:`GradientStack<neural_nmf.stack.GradientStack>`
        Gradient to certify. Computed with
        :func:`grad_A<neural_nmf.engine.grad_A>` when omitted.

    See :func:`finite_diff_loss_grad` for the other parameters.

    Returns
    -------
    :class:`GradReport`
    """
    X = as_matrix(X, 'X', nonnegative=True)
    A_list = [as_matrix(A, 'A') for A in A_list]
    B = _base_B(X, A_list, loss, kkt_tol)
    if analytic is None:
        stack = engine.forward(A_list, X, tol=kkt_tol)
        analytic = engine.grad_A(stack, loss, B=B, kkt_tol=kkt_tol)
    numeric = finite_diff_loss_grad(
        X, A_list, loss, h=h, probes=probes, seed=seed, B=B, kkt_tol=kkt_tol)
    report = compare(analytic, numeric, rtol=rtol)
    if report.stable_fraction < 0.95:
        _LG.warning(
            'Only %.1f%% of the probes were support-stable.',
            100 * report.stable_fraction)
    _LG.info(
        'Gradient check: max relative error %s (rtol %g) -> %s',
        ['%.3g' % e for e in report.max_rel_error], rtol,
        'PASS' if report.passed else 'FAIL')
    return report
