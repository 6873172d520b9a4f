"""Command line options shared by the subcommands."""
import hashlib
import logging
import argparse
import functools

from neural_nmf import config as config_, exception

_LG = logging.getLogger(__name__)

# config key -> (flag, type, help)
_OPTIONS = {
    'method': ('--method', str, 'Factorization method; nmf, ssnmf, hnmf or neural.'),
    'ranks': ('--ranks', str, 'Comma separated ranks of every layer, e.g. 9,4,2.'),
    'supervision': (
        '--supervision', str, 'Label supervision; none, full or semi:<fraction>.'),
    'loss': (
        '--loss', str,
        'Loss of the neural method; final, all, classification or '
        'reconstruction+classification.'),
    'lambda': ('--lambda', float, 'Weight of the classification term.'),
    'gamma': ('--gamma', float, 'Step size of the projected gradient descent.'),
    'iters': ('--iters', int, 'Number of gradient descent iterations.'),
    'mu_iters': ('--mu-iters', int, 'Multiplicative update iterations per layer.'),
    'trials': ('--trials', int, 'Number of trials. Trial t uses seed + t.'),
    'seed': ('--seed', int, 'Random seed.'),
    'out': ('--out', str, 'Output directory.'),
    'data': ('--data', str, 'Data file. Synthetic data is generated when omitted.'),
    'labels': ('--labels', str, 'doc_id,class CSV.'),
    'model': ('--model', str, 'Trial directory written by train.'),
    'conv_tol': ('--conv-tol', float, 'Relative loss change considered converged.'),
    'step_rule': ('--step-rule', str, 'constant, backtracking or linesearch.'),
    'h': ('--h', float, 'Finite difference step.'),
    'rtol': ('--rtol', float, 'Relative error tolerance.'),
    'probes': ('--probes', int, 'Probes per A matrix. 0 probes every entry.'),
    'rows': ('--rows', int, 'Rows of the random instance.'),
    'cols': ('--cols', int, 'Columns of the random instance.'),
    'threads': ('--threads', int, 'Number of trials run in parallel.'),
}


def build_parser(description, keys):
    """Argument parser with ``--config``, ``--debug`` and the given keys.

    Flags that are not given do not appear in the parsed namespace, so
    that they do not override the config file.
    """
    parser = argparse.ArgumentParser(
        description=description,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument(
        '--config', help='key=value file. Flags take precedence over it.')
    for key in keys:
        flag, type_, help_ = _OPTIONS[key]
        parser.add_argument(flag, dest=key, type=type_, help=help_)
    parser.add_argument('--debug', action='store_true', default=False)
    return parser


def load(namespace, defaults=None):
    """Build :class:`RunConfig<neural_nmf.config.RunConfig>` from parsed args."""
    overrides = {
        key: value for key, value in vars(namespace).items()
        if key in config_.KEYS
    }
    return config_.load_config(
        getattr(namespace, 'config', None), overrides, defaults)


def sha256(path):
    """Hex digest of a file's content."""
    digest = hashlib.sha256()
    with open(path, 'rb') as fileobj:
        for chunk in iter(lambda: fileobj.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def exit_code(main):
    """Turn package and IO errors into exit code 1."""
    @functools.wraps(main)
    def _main(args):
        try:
            ret = main(args)
        except Exception as error:  # pylint: disable=broad-except
            if not isinstance(error, (exception.NMFException, OSError)):
                raise
            _LG.error('%s', error)
            return 1
        return 0 if ret is None else ret
    return _main
