"""Implements ``gradcheck`` command."""
import os
import json
import logging

import numpy as np

from neural_nmf import gradcheck, synthetic
from neural_nmf.command import _options
from neural_nmf.stack import LossSpec

_LG = logging.getLogger(__name__)

_DEFAULTS = {
    'ranks': '5,3',
    'loss': 'all',
    'out': 'gradcheck',
}


def _parse_args(args):
    parser = _options.build_parser(
        'Compare analytic gradients with central finite differences '
        'on a seeded random instance.',
        ['seed', 'ranks', 'loss', 'lambda', 'supervision', 'h', 'rtol',
         'probes', 'rows', 'cols', 'out'],
    )
    return parser.parse_args(args)


def _build_loss(config, n_cols):
    kind = config.loss_kind
    if kind in ('reconstruction+classification', 'classification'):
        labels = np.random.default_rng(config.seed).integers(
            0, 2, size=n_cols)
        labels[:2] = [0, 1]
        supervision = synthetic.make_labels(
            labels, config.known_fraction, seed=config.seed, lam=config.lam)
        return LossSpec(kind=kind, lam=config.lam, supervision=supervision)
    return LossSpec(kind=kind)


@_options.exit_code
def main(args):
    """Entrypoint for ``gradcheck`` command.

    Writes ``gradcheck.json`` and returns 0 if and only if the check passed.
    For the detail of the command, use ``gradcheck --help``.
    """
    namespace = _parse_args(args)
    config = _options.load(namespace, defaults=_DEFAULTS)
    X, A_list = gradcheck.random_instance(
        config.seed, rows=config.rows, cols=config.cols, ranks=config.ranks)
    loss = _build_loss(config, config.cols)
    report = gradcheck.check(
        X, A_list, loss, h=config.h, rtol=config.rtol,
        probes=config.probes or None, seed=config.seed)

    result = report.to_dict()
    result['config'] = config.to_dict()
    os.makedirs(config.out, exist_ok=True)
    path = os.path.join(config.out, 'gradcheck.json')
    with open(path, 'w') as fileobj:
        json.dump(result, fileobj, indent=2, sort_keys=True)
    _LG.info('Wrote report to %s', path)
    return 0 if report.passed else 1
