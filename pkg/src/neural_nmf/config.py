"""Run configuration for the command line interface.

A :class:`RunConfig` is built from, in increasing precedence,

1. the dataclass defaults (optionally replaced per command),
2. a flat ``key=value`` file, where ``#`` starts a comment,
3. command line flags.
"""
import os
import logging
from dataclasses import dataclass, fields, asdict
from typing import Optional, Tuple

from neural_nmf import exception
from neural_nmf.stack import (
    LayerSpec,
    LOSS_KINDS,
    RECONSTRUCTION_FINAL,
    RECONSTRUCTION_ALL,
    RECONSTRUCTION_CLASSIFICATION,
    CLASSIFICATION,
    CUSTOM,
)

_LG = logging.getLogger(__name__)

METHODS = ('nmf', 'ssnmf', 'hnmf', 'neural')
STEP_RULES = ('constant', 'backtracking', 'linesearch')
THREADS_ENV = 'NEURAL_NMF_THREADS'

LOSS_ALIASES = {
    'final': RECONSTRUCTION_FINAL,
    'all': RECONSTRUCTION_ALL,
    'classification': CLASSIFICATION,
}


def _bool(value):
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError('not a boolean: %s' % value)


def _ranks(value):
    if isinstance(value, (tuple, list)):
        return LayerSpec(tuple(value)).ranks
    return LayerSpec.parse(value).ranks


def _optional(parser):
    def _parse(value):
        if value is None or str(value).strip().lower() in ('', 'none'):
            return None
        return parser(value)
    return _parse


def parse_supervision(value):
    """Parse ``none``, ``full`` or ``semi:<fraction>``.

    Returns
    -------
    float or None
        Fraction of known labels, None for unsupervised runs.
    """
    text = str(value).strip().lower()
    if text == 'none':
        return None
    if text == 'full':
        return 1.0
    if text.startswith('semi:'):
        fraction = float(text[len('semi:'):])
        if not 0 <= fraction <= 1:
            raise ValueError('fraction must be in [0, 1]. Found %s' % fraction)
        return fraction
    raise ValueError('expected none, full or semi:<fraction>. Found %s' % value)


def parse_loss(value):
    """Resolve short loss names (``final``, ``all``) to loss kinds."""
    text = str(value).strip()
    kind = LOSS_ALIASES.get(text, text)
    if kind not in LOSS_KINDS or kind == CUSTOM:
        raise ValueError('unknown loss: %s' % value)
    return kind


@dataclass
class RunConfig:
    """Parameters of a CLI run. Every field has a default.

    The field ``lam`` is spelled ``lambda`` in files and on the command line.
    """
    method: str = 'neural'
    ranks: Tuple[int, ...] = (9, 4, 2)
    supervision: str = 'none'
    loss: str = RECONSTRUCTION_FINAL
    lam: float = 1.0
    gamma: float = 1e-3
    iters: int = 500
    mu_iters: int = 1000
    trials: int = 1
    seed: int = 0
    out: str = 'output'
    data: Optional[str] = None
    labels: Optional[str] = None
    model: Optional[str] = None
    conv_tol: float = 1e-6
    step_rule: str = 'linesearch'
    noise: bool = True
    h: float = 1e-6
    rtol: float = 1e-5
    probes: int = 200
    rows: int = 12
    cols: int = 10
    threads: Optional[int] = None

    def __post_init__(self):
        try:
            parse_supervision(self.supervision)
            parse_loss(self.loss)
        except ValueError as error:
            raise exception.ConfigError(str(error)) from None
        if self.method not in METHODS:
            raise exception.ConfigError(
                '`method` must be one of %s. Found %s'
                % (METHODS, self.method))
        if self.step_rule not in STEP_RULES:
            raise exception.ConfigError(
                '`step_rule` must be one of %s. Found %s'
                % (STEP_RULES, self.step_rule))
        for key in ('trials', 'rows', 'cols'):
            if getattr(self, key) < 1:
                raise exception.ConfigError('`%s` must be positive.' % key)
        for key in ('iters', 'mu_iters', 'probes'):
            if getattr(self, key) < 0:
                raise exception.ConfigError('`%s` must be nonnegative.' % key)
        for key in ('lam', 'gamma', 'h', 'rtol', 'conv_tol'):
            if getattr(self, key) < 0:
                raise exception.ConfigError(
                    '`%s` must be nonnegative.' % _key_name(key))
        if self.threads is not None and self.threads < 1:
            raise exception.ConfigError('`threads` must be positive.')
        if self.method in ('ssnmf', 'nmf') and len(self.ranks) != 1:
            raise exception.ConfigError(
                'Method %s takes a single rank. Found %s'
                % (self.method, self.ranks))
        classifies = parse_loss(self.loss) in (
                RECONSTRUCTION_CLASSIFICATION, CLASSIFICATION)
        if self.known_fraction is None and (
                self.method == 'ssnmf' or classifies):
            raise exception.ConfigError(
                'Method %s with loss %s requires supervision, '
                'full or semi:<fraction>.' % (self.method, self.loss))

    @property
    def known_fraction(self):
        """Fraction of known labels, None for unsupervised runs."""
        return parse_supervision(self.supervision)

    @property
    def loss_kind(self):
        """Loss kind of the neural method.

        A supervised run adds the classification term to the
        reconstruction loss unless a classification loss is requested.
        """
        kind = parse_loss(self.loss)
        if self.known_fraction is None or kind == CLASSIFICATION:
            return kind
        return RECONSTRUCTION_CLASSIFICATION

    @property
    def n_threads(self):
        """Thread count for parallel trials.

        ``threads`` takes precedence over the ``NEURAL_NMF_THREADS``
        environment variable, which defaults to the CPU count.
        """
        if self.threads is not None:
            return self.threads
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                value = int(env)
            except ValueError:
                raise exception.ConfigError(
                    '%s must be an integer. Found %r' % (THREADS_ENV, env)
                ) from None
            if value < 1:
                raise exception.ConfigError(
                    '%s must be positive. Found %d' % (THREADS_ENV, value))
            return value
        return os.cpu_count() or 1

    def to_dict(self):
        """Config echo, keyed by the names used in config files."""
        return {_key_name(key): value for key, value in asdict(self).items()}


def _key_name(field_name):
    return 'lambda' if field_name == 'lam' else field_name


def _field_name(key):
    return 'lam' if key == 'lambda' else key


def _check_choice(choices):
    def _parse(value):
        value = str(value).strip()
        if value not in choices:
            raise ValueError('expected one of %s' % (choices,))
        return value
    return _parse


def _check_supervision(value):
    parse_supervision(value)
    return str(value).strip().lower()


_PARSERS = {
    'method': _check_choice(METHODS),
    'ranks': _ranks,
    'supervision': _check_supervision,
    'loss': parse_loss,
    'lam': float,
    'gamma': float,
    'iters': int,
    'mu_iters': int,
    'trials': int,
    'seed': int,
    'out': str,
    'data': _optional(str),
    'labels': _optional(str),
    'model': _optional(str),
    'conv_tol': float,
    'step_rule': _check_choice(STEP_RULES),
    'noise': _bool,
    'h': float,
    'rtol': float,
    'probes': int,
    'rows': int,
    'cols': int,
    'threads': _optional(int),
}

KEYS = tuple(_key_name(f.name) for f in fields(RunConfig))


def _coerce(key, value, source):
    name = _field_name(key)
    if name not in _PARSERS:
        raise exception.ConfigError(
            'Unknown key `%s` in %s. Valid keys are %s' % (key, source, KEYS))
    try:
        return name, _PARSERS[name](value)
    except (ValueError, TypeError, exception.InvalidRank) as error:
        raise exception.ConfigError(
            'Invalid value for `%s` in %s; %s' % (key, source, error)
        ) from None


def read_config_file(path):
    """Parse ``key=value`` file into a dict of raw strings.

    Raises
    ------
    :class:`ParseError<neural_nmf.exception.ParseError>`
        A line is neither blank, a comment nor ``key=value``.
    """
    values = {}
    with open(path, 'r') as fileobj:
        for lineno, line in enumerate(fileobj, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise exception.ParseError(
                    path, lineno, 'expected `key=value`. Found %r' % line)
            key, value = line.split('=', 1)
            values[key.strip()] = value.strip()
    return values


def load_config(path=None, overrides=None, defaults=None):
    """Build :class:`RunConfig`.

    Parameters
    ----------
    path : str
        Optional ``key=value`` file.
    overrides : dict
        Values from the command line. ``None`` values are ignored.
    defaults : dict
        Per command replacement of the dataclass defaults.

    Raises
    ------
    :class:`ConfigError<neural_nmf.exception.ConfigError>`
        Unknown key or invalid value.
    """
    values = {}
    layers = [('defaults', defaults or {})]
    if path is not None:
        layers.append((path, read_config_file(path)))
    layers.append(('command line', overrides or {}))
    for source, layer in layers:
        for key, value in layer.items():
            if value is None:
                continue
            name, parsed = _coerce(key, value, source)
            values[name] = parsed
    config = RunConfig(**values)
    _LG.debug('Config: %s', config.to_dict())
    return config
