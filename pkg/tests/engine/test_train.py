"""Test engine.train."""
import numpy as np
import pytest

from neural_nmf import baseline, engine, exception, gradcheck, nnls, synthetic
from neural_nmf.stack import (
    CUSTOM, RECONSTRUCTION_CLASSIFICATION, LayerSpec, LossSpec,
)

pytestmark = [pytest.mark.engine, pytest.mark.engine_train]


def _instance(seed=0):
    X, A_list = gradcheck.random_instance(seed)
    return X, [A + 0.1 for A in A_list]


def test_zero_step_keeps_stack():
    """With gamma = 0 the factors never move"""
    X, A_list = _instance()
    config = engine.TrainConfig(gamma=0.0, max_outer_iters=5)
    stack, history = engine.train(X, (5, 3), config=config, init=A_list)
    for A, A0 in zip(stack.A_list, A_list):
        np.testing.assert_array_equal(A, A0)
    assert len({h['loss'] for h in history}) == 1


def test_invariants_hold_every_iteration():
    """Stack is consistent and nonnegative after every iteration"""
    X, A_list = _instance(1)
    seen = []

    def _callback(it, stack, value):
        engine.check_consistency(stack, kkt_tol=nnls.KKT_TOL)
        assert all(A.min() >= 0 for A in stack.A_list)
        assert all(S.min() >= 0 for S in stack.S_list)
        seen.append((it, value))

    config = engine.TrainConfig(gamma=1e-3, max_outer_iters=20, conv_tol=0)
    _, history = engine.train(
        X, (5, 3), config=config, init=A_list, callback=_callback)
    assert [it for it, _ in seen] == list(range(len(history)))
    assert [v for _, v in seen] == [h['loss'] for h in history]


def test_loss_decreases():
    X, A_list = _instance(2)
    config = engine.TrainConfig(
        gamma=1e-3, max_outer_iters=50, conv_tol=0, step_rule='backtracking')
    stack, history = engine.train(X, (5, 3), config=config, init=A_list)
    best = engine.loss_eval(stack, LossSpec()).value
    assert best < history[0]['loss']
    assert best == pytest.approx(min(h['loss'] for h in history))


def test_history_keys():
    X, A_list = _instance()
    config = engine.TrainConfig(max_outer_iters=3, conv_tol=0)
    _, history = engine.train(X, (5, 3), config=config, init=A_list)
    assert [h['iteration'] for h in history] == [0, 1, 2, 3]
    assert set(history[0]) == {'iteration', 'loss', 'recon_error', 'step'}


def test_backtracking_never_increases_loss():
    X, A_list = _instance(3)
    config = engine.TrainConfig(
        gamma=0.05, max_outer_iters=10, conv_tol=0, step_rule='backtracking')
    _, history = engine.train(X, (5, 3), config=config, init=A_list)
    losses = [h['loss'] for h in history]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert all(h['step'] <= 0.05 for h in history)



def test_linesearch_step_grows():
    """Starting from a tiny step, accepted steps double while the loss falls"""
    X, A_list = _instance(3)
    config = engine.TrainConfig(
        gamma=1e-9, max_outer_iters=15, conv_tol=0, step_rule='linesearch')
    _, history = engine.train(X, (5, 3), config=config, init=A_list)
    losses = [h['loss'] for h in history]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert history[1]['step'] == 1e-9
    assert max(h['step'] for h in history) >= 2 ** 8 * 1e-9


def _failing_first_step(mocker):
    forward = engine._forward_with_jitter  # pylint: disable=protected-access
    calls = []

    def _forward(A_list, X, config, rng):
        calls.append(1)
        if len(calls) == 2:
            raise exception.RankDeficient('injected', layer=0)
        return forward(A_list, X, config, rng)

    mocker.patch('neural_nmf.engine._forward_with_jitter', _forward)


def test_rank_deficient_step_is_halved(mocker):
    X, A_list = _instance(3)
    _failing_first_step(mocker)
    config = engine.TrainConfig(
        gamma=1e-6, max_outer_iters=1, conv_tol=0, step_rule='backtracking')
    _, history = engine.train(X, (5, 3), config=config, init=A_list)
    assert history[1]['step'] == 5e-7


def test_rank_deficient_constant_step_raises(mocker):
    X, A_list = _instance(3)
    _failing_first_step(mocker)
    config = engine.TrainConfig(gamma=1e-6, max_outer_iters=1)
    with pytest.raises(exception.RankDeficient):
        engine.train(X, (5, 3), config=config, init=A_list)


def _scripted_loss(values):
    """Custom loss returning ``values`` in turn, then the last one forever"""
    values = list(values)

    def _loss(stack):
        value = values.pop(0) if len(values) > 1 else values[0]
        dS = [np.zeros_like(S) for S in stack.S_list]
        dA = [np.zeros_like(A) for A in stack.A_list]
        return value, dS, dA
    return LossSpec(kind=CUSTOM, function=_loss)


def test_divergence():
    """Loss staying above 10 x the initial loss raises"""
    X, A_list = _instance(4)
    config = engine.TrainConfig(max_outer_iters=50, divergence_patience=2)
    with pytest.raises(exception.Divergence):
        engine.train(
            X, (5, 3), config=config, init=A_list,
            loss=_scripted_loss([1.0, 1e3]))


def test_non_finite_loss():
    X, A_list = _instance(4)
    with pytest.raises(exception.Divergence):
        engine.train(
            X, (5, 3), init=A_list, loss=_scripted_loss([1.0, np.nan]))


def test_short_spike_is_tolerated():
    X, A_list = _instance(4)
    config = engine.TrainConfig(max_outer_iters=8, divergence_patience=3)
    _, history = engine.train(
        X, (5, 3), config=config, init=A_list,
        loss=_scripted_loss([1.0, 1.0, 1e3, 1e3, 0.5]))
    assert history[-1]['loss'] == 0.5


def test_jitter_recovers_rank(mocker):
    """Rank deficiency on the first attempt is fixed by jitter"""
    X, A_list = _instance(5)
    forward = engine.forward
    calls = []

    def _forward(A_list_, X_, **kwargs):
        calls.append(1)
        if len(calls) == 1:
            raise exception.RankDeficient('injected', layer=1)
        return forward(A_list_, X_, **kwargs)

    mocker.patch('neural_nmf.engine.forward', _forward)
    config = engine.TrainConfig(max_outer_iters=0)
    stack, _ = engine.train(X, (5, 3), config=config, init=A_list)
    assert not np.array_equal(stack.A_list[1], A_list[1])
    np.testing.assert_array_equal(stack.A_list[0], A_list[0])


def test_jitter_gives_up(mocker):
    X, A_list = _instance(6)
    mocker.patch(
        'neural_nmf.engine.forward',
        side_effect=exception.RankDeficient('injected', layer=0))
    config = engine.TrainConfig(max_outer_iters=1, max_jitter_retries=2)
    with pytest.raises(exception.RankDeficient):
        engine.train(X, (5, 3), config=config, init=A_list)


def test_warm_start_from_hnmf():
    """Without init, iteration 0 is the forward pass of the HNMF A matrices"""
    X, _ = _instance(7)
    config = engine.TrainConfig(max_outer_iters=0, mu_iters=30, seed=2)
    stack, history = engine.train(X, (5, 3), config=config)
    warm = baseline.hnmf(X, (5, 3), iters=30, seed=2)
    for A, A0 in zip(stack.A_list, warm.A_list):
        np.testing.assert_array_equal(A, A0)
    assert len(history) == 1


def test_init_rank_mismatch():
    X, A_list = _instance()
    with pytest.raises(exception.ShapeMismatch):
        engine.train(X, (5, 2), init=A_list)


@pytest.mark.parametrize('kwargs', [
    {'gamma': -1.0},
    {'step_rule': 'adam'},
])
def test_invalid_config(kwargs):
    with pytest.raises(exception.ConfigError):
        engine.TrainConfig(**kwargs)


@pytest.mark.parametrize('kwargs', [
    {'kind': 'hinge'},
    {'lam': -1.0},
    {'kind': RECONSTRUCTION_CLASSIFICATION},
    {'kind': CUSTOM},
])
def test_invalid_loss(kwargs):
    """Loss specs fail with the package configuration error"""
    with pytest.raises(exception.ConfigError):
        LossSpec(**kwargs)


def test_negative_supervision_weight():
    with pytest.raises(exception.ConfigError):
        synthetic.make_labels([0, 1, 1], 1.0, lam=-1.0)


def test_neural_improves_on_hnmf():
    """Training from the HNMF warm start lowers the reconstruction error"""
    dataset = synthetic.synth_hier(seed=0)
    config = engine.TrainConfig(
        gamma=1e-4, max_outer_iters=30, mu_iters=300, conv_tol=0,
        step_rule='backtracking')
    warm = baseline.hnmf(dataset.X, (9, 4), iters=300, seed=0)
    start = engine.forward(warm.A_list, dataset.X)
    stack, _ = engine.train(dataset.X, LayerSpec((9, 4)), config=config)
    before = engine.loss_eval(start, LossSpec()).value
    after = engine.loss_eval(stack, LossSpec()).value
    assert after < before


def test_supervised_training_runs():
    dataset = synthetic.synth_hier(seed=1)
    supervision = synthetic.make_labels(dataset.labels, 0.4, seed=1)
    loss = LossSpec(
        kind=RECONSTRUCTION_CLASSIFICATION, lam=1.0, supervision=supervision)
    config = engine.TrainConfig(
        max_outer_iters=5, mu_iters=100, conv_tol=0, step_rule='linesearch')
    stack, history = engine.train(
        dataset.X, (9, 4, 2), config=config, loss=loss)
    assert stack.ranks == (9, 4, 2)
    assert np.isfinite(history[-1]['loss'])
