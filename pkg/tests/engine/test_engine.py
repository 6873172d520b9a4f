"""Test forward propagation, derivatives and losses of engine module."""
import numpy as np
import pytest

from neural_nmf import engine, exception, gradcheck, nnls
from neural_nmf.stack import (
    CLASSIFICATION, CUSTOM, RECONSTRUCTION_ALL, RECONSTRUCTION_CLASSIFICATION,
    RECONSTRUCTION_FINAL, FactorStack, LossSpec,
)

from . import conftest

pytestmark = pytest.mark.engine


def test_forward_shapes(stack):
    assert stack.ranks == (5, 3)
    assert [S.shape for S in stack.S_list] == [(5, 10), (3, 10)]
    assert all(S.min() >= 0 for S in stack.S_list)


def test_forward_layers_are_nnls(stack):
    """Every S^(l) solves q(A^(l), S^(l-1))"""
    for ell in range(stack.n_layers):
        sol = nnls.nnls_matrix(stack.A_list[ell], stack.previous(ell))
        np.testing.assert_array_equal(sol.coefficients, stack.S_list[ell])


def test_forward_consistent(stack):
    engine.check_consistency(stack)
    assert max(engine.consistency_residuals(stack)) <= nnls.KKT_TOL


def test_stack_helpers(stack):
    A0, A1 = stack.A_list
    np.testing.assert_array_equal(stack.product(0), A0)
    np.testing.assert_allclose(stack.product(), A0 @ A1)
    np.testing.assert_allclose(stack.reconstruction(), A0 @ A1 @ stack.S_list[1])
    assert stack.previous(0) is stack.X
    assert [mask.shape for mask in stack.masks] == [(5, 10), (3, 10)]


def test_inconsistent_stack(stack):
    S_list = [S.copy() for S in stack.S_list]
    S_list[1] += 1.0
    broken = FactorStack(stack.A_list, S_list, stack.X)
    with pytest.raises(exception.InconsistentStack):
        engine.check_consistency(broken)
    with pytest.raises(exception.InconsistentStack):
        engine.grad_A(broken, LossSpec())


def test_forward_rank_deficient_layer():
    """Offending layer is reported"""
    X, A_list = gradcheck.random_instance(0)
    A_list[1][:, 1] = A_list[1][:, 0]
    with pytest.raises(exception.RankDeficient) as info:
        engine.forward(A_list, X)
    assert info.value.layer == 1


def test_forward_shape_mismatch():
    X, A_list = gradcheck.random_instance(0)
    with pytest.raises(exception.ShapeMismatch):
        engine.forward(A_list[::-1], X)


def test_dq_dx_matches_finite_difference():
    rng = np.random.default_rng(0)
    A, x = rng.random((8, 4)), rng.random(8)
    s, T = nnls.nnls_column(A, x)
    analytic = engine.dq_dx(A, T)
    numeric = conftest.numeric_jacobian(lambda v: nnls.nnls_column(A, v)[0], x)
    np.testing.assert_allclose(analytic, numeric, atol=1e-6)
    assert s.shape == (4,)


@pytest.mark.parametrize('i', [0, 3, 7])
def test_dq_dA_row_matches_finite_difference(i):
    rng = np.random.default_rng(1)
    A, x = rng.random((8, 4)), rng.random(8)
    _, T = nnls.nnls_column(A, x)

    def _q(row):
        A_ = A.copy()
        A_[i] = row
        return nnls.nnls_column(A_, x)[0]

    analytic = engine.dq_dA_row(A, x, T, i)
    numeric = conftest.numeric_jacobian(_q, A[i])
    np.testing.assert_allclose(analytic, numeric, atol=1e-6)


def test_dq_dA_row_out_of_range():
    with pytest.raises(exception.IndexOutOfRange):
        engine.dq_dA_row(np.eye(3), np.ones(3), [0], 3)


def test_phi_single_layer(stack):
    """Phi over one layer is the restricted pseudoinverse"""
    for m in range(stack.X.shape[1]):
        T = stack.supports[0][m]
        expected = np.linalg.pinv(stack.A_list[0][:, T])
        np.testing.assert_allclose(
            engine.phi(stack, 0, 0, m), expected, atol=1e-10)


def test_phi_recursion(stack):
    """Phi(l1, l2) = pinv(A2_T2)[:, T1] Phi(l1, l2 - 1)"""
    for m in range(stack.X.shape[1]):
        T0, T1 = stack.supports[0][m], stack.supports[1][m]
        P = np.linalg.pinv(stack.A_list[1][:, T1])
        expected = P[:, T0] @ engine.phi(stack, 0, 0, m)
        np.testing.assert_allclose(
            engine.phi(stack, 0, 1, m), expected, atol=1e-10)


def test_phi_is_jacobian(stack):
    """Phi is the Jacobian of S^(l2)[T, m] with respect to the data column"""
    m = 0
    T = stack.supports[1][m]

    def _s(x):
        data = stack.X.copy()
        data[:, m] = x
        return engine.forward(stack.A_list, data).S_list[1][T, m]

    numeric = conftest.numeric_jacobian(_s, stack.X[:, m])
    np.testing.assert_allclose(
        engine.phi(stack, 0, 1, m), numeric, atol=1e-5)


def test_phi_invalid_layers(stack):
    with pytest.raises(exception.IndexOutOfRange):
        engine.phi(stack, 1, 0, 0)


def test_reconstruction_final_value(stack):
    residual = stack.X - stack.A_list[0] @ stack.A_list[1] @ stack.S_list[1]
    value = engine.loss_eval(stack, LossSpec()).value
    assert value == pytest.approx(np.sum(residual ** 2))


def test_reconstruction_all_layers_value(stack):
    final = engine.loss_eval(stack, LossSpec()).value
    layer = stack.S_list[0] - stack.A_list[1] @ stack.S_list[1]
    value = engine.loss_eval(stack, LossSpec(kind=RECONSTRUCTION_ALL)).value
    assert value == pytest.approx(final + np.sum(layer ** 2))


def test_classification_value(stack):
    loss = conftest.supervised_loss(CLASSIFICATION)
    evaluation = engine.loss_eval(stack, loss)
    sup = loss.supervision
    error = sup.Z * (sup.Y - evaluation.B @ stack.S_list[-1])
    assert evaluation.value == pytest.approx(loss.lam * np.sum(error ** 2))



def test_classification_B_fits_labeled_columns(stack):
    """With partial labels B is the least squares fit on the labeled columns"""
    loss = conftest.supervised_loss(CLASSIFICATION, fraction=0.4)
    known = loss.supervision.known
    S_known = stack.S_list[-1][:, known]
    Y_known = loss.supervision.Y[:, known]
    evaluation = engine.loss_eval(stack, loss)
    expected = np.linalg.lstsq(S_known.T, Y_known.T, rcond=None)[0].T
    np.testing.assert_allclose(evaluation.B, expected, atol=1e-10)
    shifted = engine.loss_eval(stack, loss, B=expected + 1e-3).value
    assert evaluation.value < shifted


@pytest.mark.parametrize('fraction', [0.4, 1.0])
def test_classification_gradient_ignores_rescaling(stack, fraction):
    """Rescaling S leaves the fitted term unchanged"""
    loss = conftest.supervised_loss(CLASSIFICATION, fraction=fraction)
    evaluation = engine.loss_eval(stack, loss)
    S = stack.S_list[-1]
    inner = np.sum(evaluation.dL_dS[-1] * S)
    scale = np.linalg.norm(evaluation.dL_dS[-1]) * np.linalg.norm(S)
    assert abs(inner) <= 1e-9 * max(scale, 1.0)


def test_classification_B_all_columns_option(stack):
    """compute_B defaults to the pseudoinverse of the whole last layer"""
    loss = conftest.supervised_loss(CLASSIFICATION, fraction=0.4)
    S = stack.S_list[-1]
    sup = loss.supervision
    np.testing.assert_allclose(
        engine.compute_B(sup, S), (sup.Z * sup.Y) @ np.linalg.pinv(S),
        atol=1e-10)
    masked = engine.compute_B(sup, S, known_only=True)
    assert not np.allclose(masked, engine.compute_B(sup, S))


def test_compute_B():
    """B S = Y when S is invertible and every label is known"""
    S = np.array([[2.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 0.0, 3.0]])
    loss = conftest.supervised_loss(CLASSIFICATION, n_cols=3)
    B = engine.compute_B(loss.supervision, S)
    np.testing.assert_allclose(B @ S, loss.supervision.Y, atol=1e-12)


def test_compute_B_rank_deficient():
    loss = conftest.supervised_loss(CLASSIFICATION, n_cols=3)
    S = np.ones((2, 3))
    with pytest.raises(exception.RankDeficient):
        engine.compute_B(loss.supervision, S)
    B = engine.compute_B(loss.supervision, S, strict=False)
    assert B.shape == (3, 2)


def test_partial_derivatives_match_finite_difference(stack):
    """dL/dA holding S fixed and dL/dS holding later S fixed"""
    loss = LossSpec(kind=RECONSTRUCTION_ALL)
    evaluation = engine.loss_eval(stack, loss)

    def _value(A0):
        A_list = [A0.reshape(stack.A_list[0].shape), stack.A_list[1]]
        moved = FactorStack(A_list, stack.S_list, stack.X, stack.supports)
        return np.array([engine.loss_eval(moved, loss).value])

    numeric = conftest.numeric_jacobian(_value, stack.A_list[0].ravel())
    np.testing.assert_allclose(
        numeric.reshape(stack.A_list[0].shape), evaluation.dL_dA[0],
        rtol=1e-5, atol=1e-6)


def test_custom_loss(stack):
    """Custom loss receives the stack and its partials are used as given"""
    def _loss(stack_):
        dS = [np.zeros_like(S) for S in stack_.S_list]
        dA = [np.zeros_like(A) for A in stack_.A_list]
        dS[-1] = np.ones_like(stack_.S_list[-1])
        return float(stack_.S_list[-1].sum()), dS, dA

    loss = LossSpec(kind=CUSTOM, function=_loss)
    evaluation = engine.loss_eval(stack, loss)
    assert evaluation.value == pytest.approx(stack.S_list[-1].sum())
    report = gradcheck.check(stack.X, stack.A_list, loss, probes=None)
    assert report.passed


@pytest.mark.parametrize('kind', [
    RECONSTRUCTION_FINAL,
    RECONSTRUCTION_ALL,
    RECONSTRUCTION_CLASSIFICATION,
    CLASSIFICATION,
])
def test_grad_A_matches_finite_difference(stack, kind):
    if kind in (RECONSTRUCTION_CLASSIFICATION, CLASSIFICATION):
        loss = conftest.supervised_loss(kind)
    else:
        loss = LossSpec(kind=kind)
    report = gradcheck.check(stack.X, stack.A_list, loss)
    assert report.passed, report.to_dict()


def test_grad_A_semisupervised(stack):
    loss = conftest.supervised_loss(RECONSTRUCTION_CLASSIFICATION, fraction=0.4)
    report = gradcheck.check(stack.X, stack.A_list, loss)
    assert report.passed, report.to_dict()


def test_grad_A_single_layer():
    X, A_list = gradcheck.random_instance(3, ranks=(4,))
    report = gradcheck.check(X, A_list, LossSpec())
    assert report.passed, report.to_dict()


def test_grad_A_three_layers():
    X, A_list = gradcheck.random_instance(4, rows=14, cols=9, ranks=(6, 4, 2))
    report = gradcheck.check(X, A_list, LossSpec(kind=RECONSTRUCTION_ALL))
    assert report.passed, report.to_dict()


def test_grad_A_shapes(stack):
    grads = engine.grad_A(stack, LossSpec())
    grads.check_shapes(stack.A_list)
    assert len(grads) == 2


def test_grad_A_zero_at_exact_factorization():
    """Reconstruction gradient vanishes when X = A S exactly"""
    rng = np.random.default_rng(0)
    A = rng.random((8, 3))
    X = A @ rng.random((3, 6))
    stack = engine.forward([A], X)
    grads = engine.grad_A(stack, LossSpec())
    np.testing.assert_allclose(grads[0], 0, atol=1e-10)
