"""Neural NMF: forward propagation through stacked NNLS solves and analytic
backpropagation to the A matrices.

The forward pass defines ``S^(l) = q(A^(l), S^(l-1))`` with ``S^(-1) = X``,
where ``q`` is the NNLS map of :mod:`neural_nmf.nnls`. On the support ``T``
of a column, ``q`` coincides with ``pinv(A[:, T]) @ x``, so as long as the
supports do not move, ``q`` is differentiable and its derivatives are
expressed through restricted pseudoinverses. Supports are read from the
forward pass and held fixed within one gradient evaluation.
"""
import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np

from neural_nmf import exception, nnls
from neural_nmf.baseline import DEFAULT_ITERS, hnmf
from neural_nmf.matrix import (
    RANK_TOL, as_matrix, frobenius, pinv, relu, restrict, scatter_rows,
)
from neural_nmf.stack import (
    CLASSIFICATION, CUSTOM, RECONSTRUCTION_ALL, FactorStack, GradientStack,
    LayerSpec, LossSpec, check_chain,
)

_LG = logging.getLogger(__name__)

STEP_RULES = ('constant', 'backtracking', 'linesearch')


def forward(
        A_list, X, tol=nnls.KKT_TOL, support_tol=nnls.SUPPORT_TOL,
        rank_tol=RANK_TOL):
    """Forward propagation ``S^(l) = q(A^(l), S^(l-1))``.

    Parameters
    ----------
    A_list : list of array-like
        ``A^(l)`` of shape ``(k^(l-1), k^(l))`` with ``k^(-1) = N``.
    X : array-like
        (N, M) nonnegative data.

    Returns
    -------
    :class:`FactorStack<neural_nmf.stack.FactorStack>`

    Raises
    ------
    :class:`RankDeficient<neural_nmf.exception.RankDeficient>`
        Some ``A^(l)`` does not have full column rank. ``layer`` attribute
        identifies it.
    """
    X = as_matrix(X, 'X', nonnegative=True)
    A_list = [as_matrix(A, 'A^(%d)' % ell) for ell, A in enumerate(A_list)]
    check_chain(A_list, X.shape[0])

    S_list, supports, residuals = [], [], []
    data = X
    for ell, A in enumerate(A_list):
        try:
            sol = nnls.nnls_matrix(
                A, data, tol=tol, support_tol=support_tol, rank_tol=rank_tol)
        except exception.RankDeficient:
            raise exception.RankDeficient(
                'A^(%d) of shape %s does not have full column rank'
                % (ell, A.shape), layer=ell) from None
        S_list.append(sol.coefficients)
        supports.append(sol.supports)
        residuals.append(sol.kkt_residuals)
        data = sol.coefficients
    return FactorStack(
        A_list=A_list, S_list=S_list, X=X, supports=supports,
        kkt_residuals=residuals)


def consistency_residuals(stack):
    """Scaled KKT residual of every layer of ``stack``.

    Returns
    -------
    list of float
        Maximum over columns of the KKT residual of
        ``S^(l)`` as the solution of ``q(A^(l), S^(l-1))``.
    """
    out = []
    for ell, (A, S) in enumerate(zip(stack.A_list, stack.S_list)):
        prev = stack.previous(ell)
        res = nnls._kkt_violation(A, prev, S) / nnls._kkt_scale(A, prev)
        out.append(float(res.max()) if res.size else 0.0)
    return out


def check_consistency(stack, kkt_tol=nnls.KKT_TOL):
    """Raise unless every ``S^(l)`` solves ``q(A^(l), S^(l-1))``.

    Raises
    ------
    :class:`InconsistentStack<neural_nmf.exception.InconsistentStack>`
    """
    for ell, res in enumerate(consistency_residuals(stack)):
        if res > kkt_tol:
            raise exception.InconsistentStack(
                'S^(%d) violates the KKT conditions; residual %g > %g'
                % (ell, res, kkt_tol))


def dq_dx(A, T, rank_tol=RANK_TOL):
    """Jacobian of ``q(A, x)`` with respect to ``x``.

    Rows ``T`` are ``pinv(A[:, T])``, the other rows are zero.

    Parameters
    ----------
    A : numpy.ndarray
        (n, k) matrix with full column rank.
    T : array-like of int
        Support of ``q(A, x)``.

    Returns
    -------
    numpy.ndarray
        (k, n) matrix.
    """
    A = as_matrix(A, 'A')
    A_T = restrict(A, None, T)
    return scatter_rows(pinv(A_T, rank_tol=rank_tol), T, A.shape[1])


def dq_dA_row(A, x, T, i, rank_tol=RANK_TOL):
    """Jacobian of ``q(A, x)`` with respect to row ``i`` of ``A``.

    The ``(T, T)`` block is
    ``-P[:, i] (P x)^T + ((I - A_T P) x)_i P P^T`` with ``P = pinv(A_T)``;
    every other entry is zero. Entry ``(a, b)`` is the derivative of
    component ``a`` of ``q`` with respect to ``A[i, b]``.

    Returns
    -------
    numpy.ndarray
        (k, k) matrix.
    """
    A = as_matrix(A, 'A')
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    k = A.shape[1]
    if not 0 <= i < A.shape[0]:
        raise exception.IndexOutOfRange('row %d of %d' % (i, A.shape[0]))
    out = np.zeros((k, k))
    T = np.asarray(T, dtype=np.int64).reshape(-1)
    if T.size == 0:
        return out
    A_T = restrict(A, None, T)
    P = pinv(A_T, rank_tol=rank_tol)
    residual = x - A_T @ (P @ x)
    block = -np.outer(P[:, i], P @ x) + residual[i] * (P @ P.T)
    out[np.ix_(T, T)] = block
    return out


def phi(stack, ell1, ell2, m, rank_tol=RANK_TOL):
    """Chained restricted pseudoinverses from layer ``ell1`` to ``ell2``.

    ``Phi = pinv(A2_T2)[:, T1'] ... pinv(A1'_T1')[:, T1] pinv(A1_T1)`` where
    each ``T`` is the support of column ``m`` at the respective layer.
    It equals the Jacobian of ``S^(ell2)[T, m]`` with respect to
    ``S^(ell1-1)[:, m]``.

    Returns
    -------
    numpy.ndarray
        ``(|T^(ell2)|, k^(ell1-1))`` matrix. Empty supports yield
        matrices with a zero-length dimension.
    """
    if not 0 <= ell1 <= ell2 < stack.n_layers:
        raise exception.IndexOutOfRange(
            'layers (%d, %d) of %d' % (ell1, ell2, stack.n_layers))
    supports = [stack.supports[ell][m] for ell in range(stack.n_layers)]
    out = pinv(
        restrict(stack.A_list[ell1], None, supports[ell1]), rank_tol=rank_tol)
    for ell in range(ell1 + 1, ell2 + 1):
        P = pinv(
            restrict(stack.A_list[ell], None, supports[ell]),
            rank_tol=rank_tol)
        out = P[:, supports[ell - 1]] @ out
    return out


def compute_B(
        supervision, S_last, strict=True, clamp=False, known_only=False,
        rank_tol=RANK_TOL):
    """Supervision matrix ``B = (Z * Y) pinv(S^(L))``.

    Parameters
    ----------
    supervision : :class:`SupervisionData<neural_nmf.stack.SupervisionData>`
    S_last : numpy.ndarray
        (k, M) last layer coefficients.
    strict : bool
        If True, a rank deficient ``S_last`` raises. Otherwise a truncated
        pseudoinverse is used.
    clamp : bool
        Clamp negative entries of ``B`` to zero.
    known_only : bool
        Restrict ``S^(L)`` to the labeled columns before inverting, i.e.
        ``B = (Z * Y) pinv(S^(L) diag(z))``. This is the minimizer of
        ``||Z * (Y - B S^(L))||^2`` over B. Identical to the default when
        every label is known.

    Raises
    ------
    :class:`RankDeficient<neural_nmf.exception.RankDeficient>`
    """
    if S_last.shape[1] != supervision.Y.shape[1]:
        raise exception.ShapeMismatch(
            'S has %d columns, Y has %d columns'
            % (S_last.shape[1], supervision.Y.shape[1]))
    if known_only:
        S_last = S_last * supervision.known
    try:
        S_pinv = pinv(S_last, rank_tol=rank_tol)
    except exception.RankDeficient:
        if strict:
            raise
        _LG.warning(
            'S^(L) does not have full row rank. '
            'Using truncated pseudoinverse to compute B.')
        S_pinv = pinv(S_last, rank_tol=rank_tol, strict=False)
    B = (supervision.Z * supervision.Y) @ S_pinv
    return relu(B) if clamp else B


class LossEvaluation(NamedTuple):
    """Loss value and partial derivatives.

    ``dL_dS[l]`` is the derivative with respect to ``S^(l)`` holding the
    later S matrices constant. ``dL_dA[l]`` is the derivative with respect
    to ``A^(l)`` holding every S constant.
    """
    value: float
    dL_dS: List[np.ndarray]
    dL_dA: List[np.ndarray]
    B: Optional[np.ndarray] = None


def _reconstruction_term(stack, dS, dA):
    last = stack.n_layers - 1
    prefix = [np.eye(stack.X.shape[0])]
    for A in stack.A_list:
        prefix.append(prefix[-1] @ A)
    suffix = [stack.S_list[last]]
    for A in reversed(stack.A_list[1:]):
        suffix.append(A @ suffix[-1])
    suffix.reverse()

    residual = stack.X - prefix[-1] @ stack.S_list[last]
    dS[last] -= 2 * prefix[-1].T @ residual
    for ell in range(stack.n_layers):
        dA[ell] -= 2 * prefix[ell].T @ residual @ suffix[ell].T
    return float(np.sum(residual ** 2))


def _layer_terms(stack, dS, dA):
    value = 0.0
    for ell in range(1, stack.n_layers):
        A, S, prev = stack.A_list[ell], stack.S_list[ell], stack.S_list[ell - 1]
        residual = prev - A @ S
        value += float(np.sum(residual ** 2))
        dA[ell] -= 2 * residual @ S.T
        dS[ell] -= 2 * A.T @ residual
        dS[ell - 1] += 2 * residual
    return value


def _classification_term(stack, loss, B, dS):
    sup = loss.supervision
    S = stack.S_list[-1]
    error = sup.Z * (sup.Y - B @ S)
    dS[-1] -= 2 * loss.lam * B.T @ error
    return loss.lam * float(np.sum(error ** 2))


def loss_eval(stack, loss, B=None):
    """Evaluate the loss and its partial derivatives.

    Parameters
    ----------
    stack : :class:`FactorStack<neural_nmf.stack.FactorStack>`
    loss : :class:`LossSpec<neural_nmf.stack.LossSpec>`
    B : numpy.ndarray
        Classification matrix to use. It is a constant of the loss; no
        derivative flows through it. When omitted, the least squares
        solution over the labeled columns is used, so that the partials
        equal those of the loss minimized over B.

    Returns
    -------
    :class:`LossEvaluation`
    """
    if loss.kind == CUSTOM:
        value, dS, dA = loss.function(stack)
        return LossEvaluation(float(value), list(dS), list(dA))

    dS = [np.zeros_like(S) for S in stack.S_list]
    dA = [np.zeros_like(A) for A in stack.A_list]
    value = 0.0
    if loss.kind != CLASSIFICATION:
        value += _reconstruction_term(stack, dS, dA)
    if loss.kind == RECONSTRUCTION_ALL:
        value += _layer_terms(stack, dS, dA)
    if loss.classifies:
        if B is None:
            B = compute_B(
                loss.supervision, stack.S_list[-1], strict=False,
                known_only=True)
        value += _classification_term(stack, loss, B, dS)
    return LossEvaluation(value, dS, dA, B)


def grad_A(stack, loss, B=None, kkt_tol=nnls.KKT_TOL, check=True,
           rank_tol=RANK_TOL):
    """Gradient of the loss with respect to every A matrix.

    The gradient with respect to ``A^(l1)`` is the direct partial plus,
    for every column ``m`` and every layer ``l2 >= l1``, the contribution

        U[:, T] = -d s_T^T + r d^T pinv(A_T)^T,  U[:, T^c] = 0

    where ``T`` is the support of column m at layer l1, ``s_T`` its
    coefficients, ``r`` the residual ``S^(l1-1)[:, m] - A^(l1) S^(l1)[:, m]``
    and ``d = Phi^T (dL/dS^(l2))[T^(l2), m]``. Since U is linear in ``d``,
    the sum over ``l2`` is accumulated in a single backward sweep. Columns
    sharing a support share the restricted pseudoinverse.

    Parameters
    ----------
    stack : :class:`FactorStack<neural_nmf.stack.FactorStack>`
        Output of :func:`forward`.
    loss : :class:`LossSpec<neural_nmf.stack.LossSpec>`
    B : numpy.ndarray
        Classification matrix held constant. See :func:`loss_eval`.
    check : bool
        Verify that the stack is consistent before differentiating.

    Returns
    -------
    :class:`GradientStack<neural_nmf.stack.GradientStack>`

    Raises
    ------
    :class:`InconsistentStack<neural_nmf.exception.InconsistentStack>`
    """
    if check:
        check_consistency(stack, kkt_tol)
    evaluation = loss_eval(stack, loss, B=B)
    dA = [np.array(d, dtype=np.float64) for d in evaluation.dL_dA]
    masks = stack.masks

    grad_S = np.array(evaluation.dL_dS[-1], dtype=np.float64)
    for ell in reversed(range(stack.n_layers)):
        A, S, prev = stack.A_list[ell], stack.S_list[ell], stack.previous(ell)
        grad_S = grad_S * masks[ell]
        grad_prev = np.zeros_like(prev)
        residual = prev - A @ S
        for supp, cols in nnls.support_groups(masks[ell]):
            if supp.size == 0:
                continue
            P = pinv(A[:, supp], rank_tol=rank_tol)
            d = P.T @ grad_S[np.ix_(supp, cols)]
            grad_prev[:, cols] = d
            dA[ell][:, supp] += (
                -d @ S[np.ix_(supp, cols)].T
                + residual[:, cols] @ (d.T @ P.T))
        if ell > 0:
            grad_S = evaluation.dL_dS[ell - 1] + grad_prev
    return GradientStack(dA_list=dA)


@dataclass
class TrainConfig:
    """Parameters of :func:`train`.

    :ivar float gamma: Step size.
    :ivar int max_outer_iters: Maximum number of gradient steps.
    :ivar float conv_tol: Relative loss change threshold.
    :ivar int conv_window: Number of iterations the change is measured over.
    :ivar int mu_iters: Multiplicative update iterations per layer of the
        HNMF warm start.
    :ivar int seed: Seed of the warm start and of the jitter.
    :ivar str step_rule: ``constant``; ``backtracking``, which halves
        ``gamma`` until the loss does not increase; or ``linesearch``, which
        halves from twice the previously accepted step. ``gamma`` is then
        only the first trial step.
    """
    gamma: float = 1e-3
    max_outer_iters: int = 500
    conv_tol: float = 1e-6
    conv_window: int = 5
    mu_iters: int = DEFAULT_ITERS
    seed: int = 0
    kkt_tol: float = nnls.KKT_TOL
    support_tol: float = nnls.SUPPORT_TOL
    rank_tol: float = RANK_TOL
    jitter: float = 1e-8
    max_jitter_retries: int = 3
    divergence_factor: float = 10.0
    divergence_patience: int = 10
    step_rule: str = 'constant'
    max_halvings: int = 30

    def __post_init__(self):
        if self.gamma < 0:
            raise exception.ConfigError('`gamma` must be nonnegative.')
        if self.step_rule not in STEP_RULES:
            raise exception.ConfigError(
                '`step_rule` must be one of %s. Found %s'
                % (STEP_RULES, self.step_rule))


def _forward_with_jitter(A_list, X, config, rng):
    """Forward pass, jittering rank deficient A matrices.

    Returns the (possibly jittered) A matrices along with the stack.
    """
    A_list = [A.copy() for A in A_list]
    for attempt in range(config.max_jitter_retries + 1):
        try:
            stack = forward(
                A_list, X, tol=config.kkt_tol,
                support_tol=config.support_tol, rank_tol=config.rank_tol)
            return A_list, stack
        except exception.RankDeficient as error:
            if attempt == config.max_jitter_retries or error.layer is None:
                raise
            _LG.warning(
                'A^(%d) lost full column rank. Adding jitter %g (attempt %d)',
                error.layer, config.jitter, attempt + 1)
            A = A_list[error.layer]
            A_list[error.layer] = A + config.jitter * rng.random(A.shape)
    raise AssertionError('unreachable')


def _relative_error(stack):
    norm = frobenius(stack.X)
    return frobenius(stack.X - stack.reconstruction()) / norm if norm else 0.0


def _initial_factors(X, layers, config, loss, init):
    if init is None:
        _LG.info('Warm starting from HNMF with ranks %s', layers.ranks)
        warm = hnmf(
            X, layers, iters=config.mu_iters, seed=config.seed,
            supervision=loss.supervision)
        return [A.copy() for A in warm.A_list]
    A_list = init.A_list if isinstance(init, FactorStack) else init
    A_list = [as_matrix(A, 'A', nonnegative=True) for A in A_list]
    check_chain(A_list, X.shape[0])
    if tuple(A.shape[1] for A in A_list) != layers.ranks:
        raise exception.ShapeMismatch(
            'initial ranks %s, expected %s'
            % (tuple(A.shape[1] for A in A_list), layers.ranks))
    return A_list


def train(X, layers, config=None, loss=None, init=None, callback=None):
    """Train Neural NMF by projected gradient descent on the A matrices.

    Every outer iteration runs the forward pass, the analytic gradient and
    the projected update ``A <- relu(A - gamma dL/dA)``.

    Parameters
    ----------
    X : array-like
        (N, M) nonnegative data.
    layers : :class:`LayerSpec<neural_nmf.stack.LayerSpec>` or sequence of int
    config : :class:`TrainConfig`
    loss : :class:`LossSpec<neural_nmf.stack.LossSpec>`
        Defaults to the final layer reconstruction error.
    init : :class:`FactorStack<neural_nmf.stack.FactorStack>` or list
        Initial A matrices. Warm started from :func:`hnmf
        <neural_nmf.baseline.hnmf>` when omitted.
    callback : callable
        Called as ``callback(iteration, stack, loss_value)`` after every
        iteration, including iteration 0 (the initial forward pass).

    Returns
    -------
    tuple
        The stack with the lowest loss, and the history as a list of dicts
        with ``iteration``, ``loss``, ``recon_error`` and ``step`` keys.

    Raises
    ------
    :class:`RankDeficient<neural_nmf.exception.RankDeficient>`
        Jitter did not restore full column rank.
    :class:`Divergence<neural_nmf.exception.Divergence>`
        Loss stayed above ``divergence_factor`` times the initial loss for
        ``divergence_patience`` consecutive iterations, or became non-finite.
    """
    config = config or TrainConfig()
    loss = loss or LossSpec()
    X = as_matrix(X, 'X', nonnegative=True)
    if not isinstance(layers, LayerSpec):
        layers = LayerSpec(tuple(layers))
    layers.validate(X.shape[0])
    rng = np.random.default_rng(config.seed)

    A_list = _initial_factors(X, layers, config, loss, init)
    A_list, stack = _forward_with_jitter(A_list, X, config, rng)
    evaluation = loss_eval(stack, loss)
    initial = evaluation.value
    best_value, best_stack = evaluation.value, stack
    history = [{
        'iteration': 0, 'loss': evaluation.value,
        'recon_error': _relative_error(stack), 'step': 0.0}]
    if callback is not None:
        callback(0, stack, evaluation.value)
    _LG.info('Initial loss: %g', initial)

    n_diverged, step = 0, config.gamma / 2
    for it in range(1, config.max_outer_iters + 1):
        grads = grad_A(
            stack, loss, B=evaluation.B, kkt_tol=config.kkt_tol, check=False,
            rank_tol=config.rank_tol)
        step = 2 * step if config.step_rule == 'linesearch' else config.gamma
        for attempt in range(config.max_halvings + 1):
            candidate = [relu(A - step * dA) for A, dA in zip(A_list, grads)]
            try:
                cand_A, cand_stack = _forward_with_jitter(
                    candidate, X, config, rng)
            except exception.RankDeficient:
                if (
                        config.step_rule == 'constant'
                        or attempt == config.max_halvings
                ):
                    raise
                _LG.debug('Step %g loses full column rank. Halving.', step)
                step /= 2
                continue
            cand_eval = loss_eval(cand_stack, loss)
            if (
                    config.step_rule == 'constant'
                    or cand_eval.value <= evaluation.value
            ):
                break
            step /= 2
        A_list, stack, evaluation = cand_A, cand_stack, cand_eval
        value = evaluation.value

        history.append({
            'iteration': it, 'loss': value,
            'recon_error': _relative_error(stack), 'step': step})
        _LG.debug('Iteration %d: loss %g, step %g', it, value, step)
        if callback is not None:
            callback(it, stack, value)

        if not np.isfinite(value):
            raise exception.Divergence(
                'Loss became non-finite at iteration %d' % it)
        if value < best_value:
            best_value, best_stack = value, stack
        n_diverged = (
            n_diverged + 1
            if value > config.divergence_factor * initial else 0)
        if n_diverged >= config.divergence_patience:
            raise exception.Divergence(
                'Loss %g exceeded %g x initial loss %g for %d iterations'
                % (value, config.divergence_factor, initial, n_diverged))
        if it >= config.conv_window:
            ref = history[-1 - config.conv_window]['loss']
            if abs(ref - value) <= config.conv_tol * max(abs(ref), 1e-300):
                _LG.info('Converged at iteration %d', it)
                break
    _LG.info(
        'Training finished after %d iterations. Best loss: %g',
        len(history) - 1, best_value)
    return best_stack, history
