"""Implements ``generate`` command."""
import os
import json
import logging

from neural_nmf import io, synthetic
from neural_nmf.command import _options

_LG = logging.getLogger(__name__)


def _parse_args(args):
    parser = _options.build_parser(
        'Generate the synthetic hierarchical dataset.', ['seed', 'out'])
    parser.add_argument(
        '--noise-free', dest='noise', action='store_false',
        help='Do not add uniform noise.',
    )
    return parser.parse_args(args)


@_options.exit_code
def main(args):
    """Entrypoint for ``generate`` command.

    Writes ``X.csv``, ``labels.csv`` and ``block_spec.json`` to the output
    directory. For the detail of the command, use ``generate --help``.
    """
    namespace = _parse_args(args)
    config = _options.load(namespace)
    dataset = synthetic.synth_hier(seed=config.seed, noise=config.noise)

    os.makedirs(config.out, exist_ok=True)
    io.write_matrix(os.path.join(config.out, 'X.csv'), dataset.X)
    io.write_labels(os.path.join(config.out, 'labels.csv'), dataset.labels)
    meta = dict(dataset.block_spec, seed=config.seed, noise=config.noise)
    with open(os.path.join(config.out, 'block_spec.json'), 'w') as fileobj:
        json.dump(meta, fileobj, indent=2, sort_keys=True)
    _LG.info('Wrote %s dataset to %s', dataset.X.shape, config.out)
