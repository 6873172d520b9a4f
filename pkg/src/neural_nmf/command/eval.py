"""Implements ``eval`` command."""
import os
import json
import glob
import logging

from neural_nmf import exception, io
from neural_nmf.command import _options
from neural_nmf.command.train import forward_metrics, load_data

_LG = logging.getLogger(__name__)


def _parse_args(args):
    parser = _options.build_parser(
        'Evaluate stored A matrices on data by a forward pass.',
        ['model', 'data', 'labels', 'seed', 'out'],
    )
    parser.add_argument(
        '--noise-free', dest='noise', action='store_false',
        help='Generate synthetic data without noise.',
    )
    return parser.parse_args(args)


def load_model(directory):
    """Read ``A_0.csv``, ``A_1.csv``, ... from a trial directory.

    Raises
    ------
    :class:`ConfigError<neural_nmf.exception.ConfigError>`
        No A matrix was found.
    """
    A_list = []
    while True:
        path = os.path.join(directory, 'A_%d.csv' % len(A_list))
        if not os.path.exists(path):
            break
        A_list.append(io.read_matrix(path))
    if not A_list:
        found = sorted(glob.glob(os.path.join(directory, '*')))
        raise exception.ConfigError(
            'No A matrices in model directory %s. Found %s'
            % (directory, found[:5]))
    _LG.info(
        'Loaded %d layers (ranks %s) from %s', len(A_list),
        [A.shape[1] for A in A_list], directory)
    return A_list


def evaluate(A_list, X, labels):
    """Reconstruction error and accuracy of every layer of the forward stack.

    Raises
    ------
    :class:`RankDeficient<neural_nmf.exception.RankDeficient>`
    """
    n_classes = None if labels is None else int(labels.max()) + 1
    result, _ = forward_metrics(X, A_list, labels, n_classes)
    if result is None:
        raise exception.RankDeficient(
            'Stored A matrices do not define a forward pass.')
    return result


@_options.exit_code
def main(args):
    """Entrypoint for ``eval`` command.

    Writes ``eval_metrics.json``, by default to the model directory.
    For the detail of the command, use ``eval --help``.
    """
    namespace = _parse_args(args)
    defaults = {}
    if getattr(namespace, 'model', None) is not None:
        defaults['out'] = namespace.model
    config = _options.load(namespace, defaults=defaults)
    if config.model is None:
        raise exception.ConfigError('`model` is required.')

    A_list = load_model(config.model)
    X, labels, hashes, _ = load_data(config)
    result = evaluate(A_list, X, labels)
    result['inputs'] = hashes
    result['model'] = config.model

    os.makedirs(config.out, exist_ok=True)
    path = os.path.join(config.out, 'eval_metrics.json')
    with open(path, 'w') as fileobj:
        json.dump(result, fileobj, indent=2, sort_keys=True)
    _LG.info('Recon error %.6g. Wrote %s', result['recon_error'], path)
