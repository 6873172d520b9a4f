"""Define fixtures for testing engine module"""
import numpy as np
import pytest

from neural_nmf import engine, gradcheck, synthetic
from neural_nmf.stack import LossSpec


@pytest.fixture(params=[0, 1, 2])
def stack(request):
    """Forward stack of a seeded random 12 x 10 instance with ranks (5, 3)"""
    X, A_list = gradcheck.random_instance(request.param)
    return engine.forward(A_list, X)


def supervised_loss(kind, n_cols=10, seed=0, fraction=1.0, lam=0.5):
    labels = np.random.default_rng(seed).integers(0, 3, n_cols)
    labels[:3] = [0, 1, 2]
    supervision = synthetic.make_labels(labels, fraction, seed=seed, lam=lam)
    return LossSpec(kind=kind, lam=lam, supervision=supervision)


def numeric_jacobian(func, x, h=1e-6):
    """Central difference Jacobian of a vector function"""
    x = np.asarray(x, dtype=np.float64)
    columns = []
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        columns.append((func(x + step) - func(x - step)) / (2 * h))
    return np.stack(columns, axis=-1)
