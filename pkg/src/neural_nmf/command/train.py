"""Implements ``train`` command."""
import os
import csv
import json
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from neural_nmf import baseline, engine, exception, io, metrics, synthetic
from neural_nmf.command import _options
from neural_nmf.stack import FactorStack, LayerSpec, LossSpec

_LG = logging.getLogger(__name__)


def _parse_args(args):
    parser = _options.build_parser(
        'Train NMF, SSNMF, HNMF or Neural NMF models.',
        ['method', 'ranks', 'supervision', 'loss', 'lambda', 'gamma', 'iters',
         'mu_iters', 'trials', 'seed', 'out', 'data', 'labels', 'conv_tol',
         'step_rule', 'threads'],
    )
    parser.add_argument(
        '--noise-free', dest='noise', action='store_false',
        help='Generate synthetic data without noise.',
    )
    return parser.parse_args(args)


def load_data(config):
    """Load data and labels named by the config.

    Synthetic data is generated from ``config.seed`` when no data file is
    given, and is shared by every trial.

    Returns
    -------
    tuple
        ``X``, labels (or None), the content hashes of the inputs and the
        vocabulary of a term-document file (or None).
    """
    if config.data is None:
        if config.labels is not None:
            raise exception.ConfigError('`labels` requires `data`.')
        dataset = synthetic.synth_hier(seed=config.seed, noise=config.noise)
        digest = hashlib.sha256(dataset.X.tobytes()).hexdigest()
        return dataset.X, dataset.labels, {'synthetic': digest}, None
    X, vocabulary, labels = io.load_dataset(config.data, config.labels)
    hashes = {'data': _options.sha256(config.data)}
    if config.labels is not None:
        hashes['labels'] = _options.sha256(config.labels)
    if not io.is_term_doc(config.data):
        vocabulary = None
    return X, labels, hashes, vocabulary


def _supervision(config, labels, seed):
    fraction = config.known_fraction
    if fraction is None:
        return None
    if labels is None:
        raise exception.ConfigError(
            'Supervision %s requires labels.' % config.supervision)
    return synthetic.make_labels(labels, fraction, seed=seed, lam=config.lam)


def _fit(X, config, supervision, seed):
    """Fit the configured method. Returns the stack and loss history rows."""
    if config.method == 'nmf':
        result = baseline.nmf_mu(X, config.ranks[0], config.mu_iters, seed)
    elif config.method == 'ssnmf':
        result = baseline.ssnmf_mu(
            X, supervision, config.ranks[0], config.mu_iters, seed)
    if config.method in ('nmf', 'ssnmf'):
        stack = FactorStack(
            [result.A], [result.S], X, B=result.B,
            objective_traces=[result.objective_trace])
    elif config.method == 'hnmf':
        stack = baseline.hnmf(
            X, LayerSpec(config.ranks), config.mu_iters, seed, supervision)
    else:
        return _fit_neural(X, config, supervision, seed)
    history = [
        {'layer': ell, 'iteration': it, 'loss': value}
        for ell, trace in enumerate(stack.objective_traces)
        for it, value in enumerate(trace)
    ]
    return stack, history


def _fit_neural(X, config, supervision, seed):
    loss = LossSpec(
        kind=config.loss_kind, lam=config.lam, supervision=supervision)
    train_config = engine.TrainConfig(
        gamma=config.gamma, max_outer_iters=config.iters,
        conv_tol=config.conv_tol, mu_iters=config.mu_iters, seed=seed,
        step_rule=config.step_rule)
    stack, history = engine.train(
        X, LayerSpec(config.ranks), config=train_config, loss=loss)
    if loss.classifies:
        stack.B = engine.compute_B(supervision, stack.S_list[-1], strict=False)
    return stack, history


def _unlabeled_accuracy(stack, labels, supervision):
    unknown = ~supervision.known
    if not np.any(unknown):
        return None
    S = stack.S_list[-1]
    B = metrics.evaluation_B(S, labels, supervision=supervision)
    return metrics.class_accuracy(B, S, labels, eval_mask=unknown)


def forward_metrics(X, A_list, labels, n_classes=None):
    """Metrics of the stack obtained by the forward pass of ``A_list``.

    Accuracy uses the classification matrix computed from every label,
    which is what ``eval`` reproduces from the stored A matrices.

    Returns
    -------
    tuple
        The metrics and the forward stack, or ``(None, None)`` when an A
        matrix is rank deficient.
    """
    try:
        stack = engine.forward(A_list, X)
    except exception.RankDeficient as error:
        _LG.warning('Forward pass is not defined; %s', error)
        return None, None
    report = metrics.layer_report(X, stack, labels, n_classes)
    return {'layers': report, 'recon_error': report[-1]['recon_error']}, stack


def run_trial(X, labels, config, trial):
    """Run one trial with seed ``config.seed + trial``.

    Returns
    -------
    dict
        ``stack``, ``history``, ``B`` (classification matrix of the forward
        stack) and ``metrics``.
    """
    seed = config.seed + trial
    _LG.info('Trial %d (seed %d): %s %s', trial, seed, config.method,
             config.ranks)
    supervision = _supervision(config, labels, seed)
    stack, history = _fit(X, config, supervision, seed)

    n_classes = None if labels is None else int(labels.max()) + 1
    native = {
        'layers': metrics.layer_report(
            X, stack, labels, n_classes, supervision),
        'recon_error': metrics.recon_error(X, stack),
    }
    if labels is not None and supervision is not None:
        native['accuracy_unlabeled'] = _unlabeled_accuracy(
            stack, labels, supervision)
    forward, fwd_stack = forward_metrics(X, stack.A_list, labels, n_classes)
    B = None
    if labels is not None and fwd_stack is not None:
        B = metrics.evaluation_B(fwd_stack.S_list[-1], labels, n_classes)
    _LG.info('Trial %d: recon error %.4f', trial, native['recon_error'])
    return {
        'stack': stack,
        'history': history,
        'B': B,
        'metrics': {
            'trial': trial, 'seed': seed, 'native': native,
            'forward': forward,
        },
    }


def _write_rows(path, rows):
    if not rows:
        return
    keys = list(rows[0])
    with open(path, 'w', newline='') as fileobj:
        writer = csv.writer(fileobj)
        writer.writerow(keys)
        for row in rows:
            writer.writerow([
                io.FLOAT_FORMAT % row[k] if isinstance(row[k], float)
                else row[k] for k in keys])


def _write_json(path, obj):
    with open(path, 'w') as fileobj:
        json.dump(obj, fileobj, indent=2, sort_keys=True)


def keywords(stack, vocabulary, n=10):
    """Top ``n`` terms of every topic of every layer, one row per term."""
    return [
        {'layer': ell, 'topic': topic, 'rank': rank, 'term': term}
        for ell in range(stack.n_layers)
        for topic, terms in enumerate(
            metrics.top_keywords(stack, vocabulary, ell, n=n))
        for rank, term in enumerate(terms)
    ]


def write_trial(directory, result):
    """Write A, S, B, loss history, heatmaps and metrics of one trial.

    Term-document runs also get ``top_keywords.csv``.
    """
    os.makedirs(directory, exist_ok=True)
    stack = result['stack']
    for ell, (A, S) in enumerate(zip(stack.A_list, stack.S_list)):
        io.write_matrix(os.path.join(directory, 'A_%d.csv' % ell), A)
        io.write_matrix(os.path.join(directory, 'S_%d.csv' % ell), S)
        io.write_heatmap(
            os.path.join(directory, 'heatmap_A_%d.csv' % ell), A)
    if result['B'] is not None:
        io.write_matrix(os.path.join(directory, 'B.csv'), result['B'])
    _write_rows(
        os.path.join(directory, 'loss_history.csv'), result['history'])
    if result.get('keywords'):
        _write_rows(
            os.path.join(directory, 'top_keywords.csv'), result['keywords'])
    _write_json(os.path.join(directory, 'metrics.json'), result['metrics'])


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def summarize(config, hashes, results):
    """Config echo, input hashes, per trial and mean metrics."""
    trials = [r['metrics'] for r in results]
    n_layers = len(config.ranks)
    mean = {}
    for block in ('native', 'forward'):
        blocks = [t[block] for t in trials if t[block] is not None]
        if not blocks:
            mean[block] = None
            continue
        mean[block] = {
            'recon_error': _mean([b['recon_error'] for b in blocks]),
            'layers': [{
                key: _mean([b['layers'][ell].get(key) for b in blocks])
                for key in ('recon_error', 'accuracy')
            } for ell in range(n_layers)],
        }
    mean['native']['accuracy_unlabeled'] = _mean(
        [t['native'].get('accuracy_unlabeled') for t in trials])
    return {
        'config': config.to_dict(),
        'inputs': hashes,
        'trials': trials,
        'mean': mean,
    }


@_options.exit_code
def main(args):
    """Entrypoint for ``train`` command.

    Every trial is computed before anything is written, so a failing run
    leaves no partial output. For the detail of the command, use
    ``train --help``.
    """
    namespace = _parse_args(args)
    config = _options.load(namespace)
    X, labels, hashes, vocabulary = load_data(config)

    with ThreadPoolExecutor(max_workers=config.n_threads) as pool:
        results = list(pool.map(
            lambda t: run_trial(X, labels, config, t), range(config.trials)))

    for result in results:
        if vocabulary is not None:
            result['keywords'] = keywords(result['stack'], vocabulary)
        write_trial(
            os.path.join(config.out, 'trial_%03d' % result['metrics']['trial']),
            result)
    summary = summarize(config, hashes, results)
    _write_json(os.path.join(config.out, 'summary.json'), summary)
    _LG.info(
        'Mean recon error over %d trials: %s', config.trials,
        summary['mean']['native']['recon_error'])
