"""Record types passed between the factorization modules."""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from neural_nmf import exception
from neural_nmf.matrix import as_matrix

_LG = logging.getLogger(__name__)


@dataclass(frozen=True)
class LayerSpec:
    """Rank sequence ``k^(0) > k^(1) > ... > k^(L)``.

    :ivar tuple ranks: Positive, strictly decreasing ranks.
    """
    ranks: Tuple[int, ...]

    def __post_init__(self):
        ranks = tuple(int(k) for k in self.ranks)
        if not ranks:
            raise exception.InvalidRank('At least one layer is required.')
        if min(ranks) <= 0:
            raise exception.InvalidRank(
                'Ranks must be positive. Found %s' % (ranks,))
        if any(lo >= hi for hi, lo in zip(ranks, ranks[1:])):
            raise exception.InvalidRank(
                'Ranks must be strictly decreasing. Found %s' % (ranks,))
        object.__setattr__(self, 'ranks', ranks)

    @classmethod
    def parse(cls, text):
        """Build from a comma separated string such as ``'9,4,2'``."""
        try:
            return cls(tuple(int(v) for v in str(text).split(',') if v))
        except ValueError:
            raise exception.InvalidRank(
                'Failed to parse ranks; %s' % text) from None

    def validate(self, n_rows):
        """Check that the first rank is smaller than the data row count."""
        if self.ranks[0] >= n_rows:
            raise exception.InvalidRank(
                'k^(0) = %d must be smaller than the number of rows %d'
                % (self.ranks[0], n_rows))

    def __len__(self):
        return len(self.ranks)


def _binary(mat, name):
    if not np.all((mat == 0) | (mat == 1)):
        raise exception.ShapeMismatch('`%s` must be a 0/1 matrix.' % name)


@dataclass
class SupervisionData:
    """Label information for semisupervised factorization.

    :ivar numpy.ndarray Y: (P, M) nonnegative label matrix.
    :ivar numpy.ndarray Z: (P, M) label indicator. Each column is either
        all ones (label known) or all zeros.
    :ivar numpy.ndarray W: (N, M) data indicator, or None for all ones.
    :ivar float lam: Weight of the classification term.
    """
    Y: np.ndarray
    Z: np.ndarray
    W: Optional[np.ndarray] = None
    lam: float = 1.0

    def __post_init__(self):
        self.Y = as_matrix(self.Y, 'Y', nonnegative=True)
        self.Z = as_matrix(self.Z, 'Z')
        if self.Y.shape != self.Z.shape:
            raise exception.ShapeMismatch(
                'Y: %s, Z: %s' % (self.Y.shape, self.Z.shape))
        _binary(self.Z, 'Z')
        if self.Z.size and not np.all(self.Z.min(axis=0) == self.Z.max(axis=0)):
            raise exception.ShapeMismatch(
                'Columns of `Z` must be all ones or all zeros.')
        if self.W is not None:
            self.W = as_matrix(self.W, 'W')
            if self.W.shape[1] != self.Y.shape[1]:
                raise exception.ShapeMismatch(
                    'W has %d columns, Y has %d columns'
                    % (self.W.shape[1], self.Y.shape[1]))
            _binary(self.W, 'W')
        if self.lam < 0:
            raise exception.ConfigError(
                '`lam` must be nonnegative. Found %s' % self.lam)

    @property
    def n_classes(self):
        return self.Y.shape[0]

    @property
    def known(self):
        """Boolean mask of the columns with a known label."""
        return self.Z[0] > 0 if self.Z.size else np.zeros(0, dtype=bool)

    def data_mask(self, shape):
        """``W``, or an all-ones matrix of ``shape`` when W is not given."""
        if self.W is None:
            return np.ones(shape)
        if self.W.shape != tuple(shape):
            raise exception.ShapeMismatch(
                'W: %s, data: %s' % (self.W.shape, tuple(shape)))
        return self.W


RECONSTRUCTION_FINAL = 'reconstruction-final'
RECONSTRUCTION_ALL = 'reconstruction-all-layers'
RECONSTRUCTION_CLASSIFICATION = 'reconstruction+classification'
CLASSIFICATION = 'classification'
CUSTOM = 'custom'

LOSS_KINDS = (
    RECONSTRUCTION_FINAL,
    RECONSTRUCTION_ALL,
    RECONSTRUCTION_CLASSIFICATION,
    CLASSIFICATION,
    CUSTOM,
)


@dataclass
class LossSpec:
    """Training objective.

    :ivar str kind: One of :data:`LOSS_KINDS`.
    :ivar float lam: Weight of the classification term.
    :ivar SupervisionData supervision: Required iff the kind has a
        classification term.
    :ivar callable function: For ``custom`` kind, a callable mapping a
        :class:`FactorStack` to ``(value, dL_dS, dL_dA)`` where the
        partials are per layer lists.
    """
    kind: str = RECONSTRUCTION_FINAL
    lam: float = 1.0
    supervision: Optional[SupervisionData] = None
    function: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise exception.ConfigError(
                '`kind` must be one of %s. Found %s' % (LOSS_KINDS, self.kind))
        if self.lam < 0:
            raise exception.ConfigError(
                '`lam` must be nonnegative. Found %s' % self.lam)
        if self.classifies != (self.supervision is not None):
            raise exception.ConfigError(
                'Supervision must be given if and only if the loss '
                'has a classification term. (kind: %s)' % self.kind)
        if (self.kind == CUSTOM) != (self.function is not None):
            raise exception.ConfigError(
                '`function` must be given if and only if kind is custom.')

    @property
    def classifies(self):
        return self.kind in (RECONSTRUCTION_CLASSIFICATION, CLASSIFICATION)


@dataclass
class FactorStack:
    """A and S matrices of every layer, with the per-column supports.

    ``A_list[l]`` has shape ``(k^(l-1), k^(l))`` with ``k^(-1) = N`` and
    ``S_list[l]`` has shape ``(k^(l), M)``.

    :ivar list A_list: A matrices.
    :ivar list S_list: S matrices.
    :ivar numpy.ndarray X: The data matrix, i.e. ``S^(-1)``.
    :ivar list supports: ``supports[l][m]`` is the support of column m of
        ``S_list[l]``. Derived from the nonzero pattern when not given.
    :ivar numpy.ndarray B: Classification matrix, if any.
    :ivar list objective_traces: Per layer objective traces of the
        multiplicative update runs that produced the stack, if any.
    :ivar list kkt_residuals: Per layer KKT residuals from the forward pass.
    """
    A_list: List[np.ndarray]
    S_list: List[np.ndarray]
    X: np.ndarray
    supports: Optional[List[List[np.ndarray]]] = None
    B: Optional[np.ndarray] = None
    objective_traces: Optional[List[List[float]]] = None
    kkt_residuals: Optional[List[np.ndarray]] = None

    def __post_init__(self):
        if len(self.A_list) != len(self.S_list) or not self.A_list:
            raise exception.ShapeMismatch(
                '%d A matrices and %d S matrices'
                % (len(self.A_list), len(self.S_list)))
        check_chain(self.A_list, self.X.shape[0])
        for ell, (A, S) in enumerate(zip(self.A_list, self.S_list)):
            if S.shape != (A.shape[1], self.X.shape[1]):
                raise exception.ShapeMismatch(
                    'S^(%d) has shape %s, expected %s'
                    % (ell, S.shape, (A.shape[1], self.X.shape[1])))
        if self.supports is None:
            self.supports = [
                [np.flatnonzero(S[:, m] > 0) for m in range(S.shape[1])]
                for S in self.S_list
            ]

    @property
    def n_layers(self):
        return len(self.A_list)

    @property
    def ranks(self):
        return tuple(A.shape[1] for A in self.A_list)

    @property
    def masks(self):
        """Boolean support indicators, one ``(k^(l), M)`` array per layer."""
        masks = []
        for S, supports in zip(self.S_list, self.supports):
            mask = np.zeros(S.shape, dtype=bool)
            for m, supp in enumerate(supports):
                mask[supp, m] = True
            masks.append(mask)
        return masks

    def previous(self, ell):
        """``S^(l-1)``, which is ``X`` for the first layer."""
        return self.X if ell == 0 else self.S_list[ell - 1]

    def product(self, ell=None):
        """``A^(0) A^(1) ... A^(l)``. Defaults to the last layer."""
        ell = self.n_layers - 1 if ell is None else ell
        out = self.A_list[0]
        for A in self.A_list[1:ell + 1]:
            out = out @ A
        return out

    def reconstruction(self, ell=None):
        """``A^(0) ... A^(l) S^(l)``. Defaults to the last layer."""
        ell = self.n_layers - 1 if ell is None else ell
        return self.product(ell) @ self.S_list[ell]


def check_chain(A_list, n_rows):
    """Check that A matrices chain from ``n_rows`` rows layer by layer."""
    rows = n_rows
    for ell, A in enumerate(A_list):
        if A.ndim != 2 or A.shape[0] != rows:
            raise exception.ShapeMismatch(
                'A^(%d) has shape %s, expected %d rows'
                % (ell, A.shape, rows))
        rows = A.shape[1]


@dataclass
class GradientStack:
    """Gradient of a loss with respect to every A matrix.

    :ivar list dA_list: One array per layer, same shapes as the A matrices.
    :ivar list probed: For finite difference gradients, boolean masks of
        the entries that were probed. None for analytic gradients.
    :ivar list stable: For finite difference gradients, boolean masks of
        the probes whose supports did not change.
    """
    dA_list: List[np.ndarray]
    probed: Optional[List[np.ndarray]] = None
    stable: Optional[List[np.ndarray]] = None

    def __post_init__(self):
        for name in ('probed', 'stable'):
            masks = getattr(self, name)
            if masks is None:
                continue
            for dA, mask in zip(self.dA_list, masks):
                if dA.shape != mask.shape:
                    raise exception.ShapeMismatch(
                        '%s mask %s, gradient %s'
                        % (name, mask.shape, dA.shape))

    def __len__(self):
        return len(self.dA_list)

    def __getitem__(self, ell):
        return self.dA_list[ell]

    def check_shapes(self, A_list):
        """Raise if shapes differ from ``A_list``."""
        if len(A_list) != len(self.dA_list) or any(
                A.shape != dA.shape for A, dA in zip(A_list, self.dA_list)):
            raise exception.ShapeMismatch(
                'gradient shapes %s, A shapes %s' % (
                    [dA.shape for dA in self.dA_list],
                    [A.shape for A in A_list]))
