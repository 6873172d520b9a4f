"""Test config module."""
import pytest

from neural_nmf import config, exception

pytestmark = pytest.mark.config


def test_defaults():
    cfg = config.load_config()
    assert cfg.method == 'neural'
    assert cfg.ranks == (9, 4, 2)
    assert cfg.known_fraction is None
    assert cfg.loss_kind == 'reconstruction-final'
    assert cfg.step_rule == 'linesearch'


def test_precedence(tmp_path):
    """Command line overrides file, file overrides defaults"""
    path = tmp_path / 'run.cfg'
    path.write_text(
        '# comment\n'
        'method = hnmf\n'
        '\n'
        'ranks = 9,4\n'
        'lambda = 0.5  # inline comment\n'
        'seed = 3\n')
    cfg = config.load_config(
        str(path), {'seed': '7', 'gamma': None}, defaults={'iters': 3})
    assert cfg.method == 'hnmf'
    assert cfg.ranks == (9, 4)
    assert cfg.lam == 0.5
    assert cfg.seed == 7
    assert cfg.gamma == 1e-3
    assert cfg.iters == 3


def test_unknown_key(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('learning_rate = 1\n')
    with pytest.raises(exception.ConfigError):
        config.load_config(str(path))


def test_malformed_line(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('method = neural\nranks\n')
    with pytest.raises(exception.ParseError) as info:
        config.load_config(str(path))
    assert info.value.line == 2


@pytest.mark.parametrize('key,value', [
    ('method', 'pca'),
    ('ranks', '4,9'),
    ('ranks', 'a,b'),
    ('supervision', 'semi:1.5'),
    ('supervision', 'partial'),
    ('iters', 'many'),
    ('step_rule', 'adam'),
    ('loss', 'custom'),
    ('trials', '0'),
    ('gamma', '-1'),
])
def test_invalid_value(key, value):
    with pytest.raises(exception.ConfigError):
        config.load_config(overrides={key: value})


@pytest.mark.parametrize('value,expected', [
    ('none', None), ('full', 1.0), ('semi:0.4', 0.4),
])
def test_supervision(value, expected):
    cfg = config.load_config(overrides={'supervision': value})
    assert cfg.known_fraction == expected


def test_supervised_loss_kind():
    cfg = config.load_config(overrides={'supervision': 'full', 'loss': 'all'})
    assert cfg.loss_kind == 'reconstruction+classification'
    cfg = config.load_config(
        overrides={'supervision': 'full', 'loss': 'classification'})
    assert cfg.loss_kind == 'classification'


def test_loss_alias_resolved():
    cfg = config.load_config(overrides={'loss': 'all'})
    assert cfg.loss_kind == 'reconstruction-all-layers'


@pytest.mark.parametrize('overrides', [
    {'method': 'ssnmf', 'ranks': '9'},
    {'loss': 'classification'},
    {'loss': 'reconstruction+classification'},
])
def test_supervision_required(overrides):
    with pytest.raises(exception.ConfigError):
        config.load_config(overrides=overrides)


def test_single_rank_methods():
    with pytest.raises(exception.ConfigError):
        config.load_config(overrides={'method': 'nmf'})
    assert config.load_config(
        overrides={'method': 'nmf', 'ranks': '9'}).ranks == (9,)


def test_threads(monkeypatch):
    monkeypatch.setenv(config.THREADS_ENV, '3')
    assert config.load_config().n_threads == 3
    assert config.load_config(overrides={'threads': '2'}).n_threads == 2
    monkeypatch.setenv(config.THREADS_ENV, 'x')
    with pytest.raises(exception.ConfigError):
        _ = config.load_config().n_threads
    monkeypatch.delenv(config.THREADS_ENV)
    assert config.load_config().n_threads >= 1


def test_to_dict_uses_file_keys():
    echo = config.load_config(overrides={'lambda': '2'}).to_dict()
    assert echo['lambda'] == 2.0
    assert 'lam' not in echo
    assert set(echo) == set(config.KEYS)
