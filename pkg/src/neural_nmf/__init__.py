__all__ = [
    '__version__',
    'FactorStack',
    'GradientStack',
    'LayerSpec',
    'LossSpec',
    'SupervisionData',
    'TrainConfig',
    'forward',
    'grad_A',
    'hnmf',
    'loss_eval',
    'nmf_mu',
    'nnls_column',
    'nnls_matrix',
    'ssnmf_mu',
    'train',
]

from ._version import __version__

from .stack import (
    FactorStack,
    GradientStack,
    LayerSpec,
    LossSpec,
    SupervisionData,
)
from .nnls import nnls_column, nnls_matrix
from .baseline import nmf_mu, ssnmf_mu, hnmf
from .engine import TrainConfig, forward, grad_A, loss_eval, train
