"""Read and write matrices, labels and term-document data."""
import csv
import logging
import os

import numpy as np
from scipy import io as sio

from neural_nmf import exception

_LG = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def write_matrix(path, mat):
    """Write matrix as CSV without header, one line per row.

    Values are written with 17 significant digits so that
    :func:`read_matrix` restores them bit for bit.
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat.reshape(-1, 1)
    np.savetxt(path, mat, fmt=FLOAT_FORMAT, delimiter=',')


def _parse_floats(path, lineno, fields):
    try:
        return [float(field) for field in fields]
    except ValueError:
        raise exception.ParseError(
            path, lineno, 'non-numeric value in %s' % fields) from None


def read_matrix(path):
    """Read matrix written by :func:`write_matrix`.

    Raises
    ------
    :class:`ParseError<neural_nmf.exception.ParseError>`
        A value is not numeric or rows have different lengths.
    """
    rows = []
    with open(path, 'r', newline='') as fileobj:
        for lineno, fields in enumerate(csv.reader(fileobj), start=1):
            if not fields:
                continue
            row = _parse_floats(path, lineno, fields)
            if rows and len(row) != len(rows[0]):
                raise exception.ParseError(
                    path, lineno,
                    'expected %d values, found %d' % (len(rows[0]), len(row)))
            rows.append(row)
    if not rows:
        raise exception.ParseError(path, None, 'empty file')
    return np.array(rows, dtype=np.float64)


def write_heatmap(path, mat):
    """Write matrix in long format, ``row,col,value``, for plotting."""
    mat = np.asarray(mat, dtype=np.float64)
    with open(path, 'w', newline='') as fileobj:
        writer = csv.writer(fileobj)
        writer.writerow(['row', 'col', 'value'])
        for (row, col), value in np.ndenumerate(mat):
            writer.writerow([row, col, FLOAT_FORMAT % value])


def write_labels(path, labels, doc_ids=None):
    """Write ``doc_id,class`` CSV. Document IDs default to column indices."""
    labels = np.asarray(labels).reshape(-1)
    doc_ids = range(labels.size) if doc_ids is None else doc_ids
    with open(path, 'w', newline='') as fileobj:
        writer = csv.writer(fileobj)
        writer.writerow(['doc_id', 'class'])
        for doc_id, label in zip(doc_ids, labels):
            writer.writerow([doc_id, int(label)])


def read_labels(path):
    """Read ``doc_id,class`` CSV.

    A first line whose class field is not an integer is treated as header.

    Returns
    -------
    tuple
        List of document IDs (str) and int64 array of classes.
    """
    doc_ids, classes = [], []
    with open(path, 'r', newline='') as fileobj:
        for lineno, fields in enumerate(csv.reader(fileobj), start=1):
            if not fields:
                continue
            if len(fields) != 2:
                raise exception.ParseError(
                    path, lineno, 'expected `doc_id,class`, found %s' % fields)
            try:
                label = int(fields[1])
            except ValueError:
                if lineno == 1:
                    continue
                raise exception.ParseError(
                    path, lineno, 'class must be integer. Found %r' % fields[1]
                ) from None
            if label < 0:
                raise exception.ParseError(
                    path, lineno, 'class must be nonnegative. Found %d' % label)
            doc_ids.append(fields[0].strip())
            classes.append(label)
    return doc_ids, np.array(classes, dtype=np.int64)


def _read_sidecar(path):
    if not os.path.exists(path):
        return None
    with open(path, 'r') as fileobj:
        return [line.rstrip('\n') for line in fileobj if line.strip()]


def _load_matrix_market(path):
    try:
        mat = sio.mmread(path)
    except (ValueError, TypeError, IndexError) as error:
        raise exception.ParseError(path, None, str(error)) from None
    # toarray sums duplicate coordinates
    X = mat.toarray() if hasattr(mat, 'toarray') else np.asarray(mat)
    base = os.path.splitext(path)[0]
    vocabulary = _read_sidecar(base + '.vocab')
    if vocabulary is None:
        vocabulary = [str(i) for i in range(X.shape[0])]
    elif len(vocabulary) != X.shape[0]:
        raise exception.ParseError(
            base + '.vocab', None,
            '%d terms for %d rows' % (len(vocabulary), X.shape[0]))
    doc_ids = _read_sidecar(base + '.docs')
    if doc_ids is None:
        doc_ids = [str(i) for i in range(X.shape[1])]
    elif len(doc_ids) != X.shape[1]:
        raise exception.ParseError(
            base + '.docs', None,
            '%d documents for %d columns' % (len(doc_ids), X.shape[1]))
    return X, vocabulary, doc_ids


def _load_dense_csv(path):
    with open(path, 'r', newline='') as fileobj:
        reader = csv.reader(fileobj)
        try:
            header = next(reader)
        except StopIteration:
            raise exception.ParseError(path, 1, 'empty file') from None
        doc_ids = [field.strip() for field in header[1:]]
        vocabulary, rows = [], []
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != len(header):
                raise exception.ParseError(
                    path, lineno,
                    'expected %d fields, found %d' % (len(header), len(fields)))
            vocabulary.append(fields[0].strip())
            rows.append(_parse_floats(path, lineno, fields[1:]))
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(doc_ids))
    return X, vocabulary, doc_ids


def _align_labels(labels_path, doc_ids):
    label_ids, classes = read_labels(labels_path)
    lookup = dict(zip(label_ids, classes))
    missing = [doc_id for doc_id in doc_ids if doc_id not in lookup]
    if missing:
        raise exception.ParseError(
            labels_path, None, 'no label for documents %s' % missing[:5])
    return np.array([lookup[doc_id] for doc_id in doc_ids], dtype=np.int64)


def load_term_doc(path, labels_path=None):
    """Load term-document matrix.

    Two formats are accepted.

    - MatrixMarket (``.mtx``). Duplicate entries are summed. Terms are read
      from ``<base>.vocab`` and document IDs from ``<base>.docs``, one per
      line, when these files exist.
    - Dense CSV. The first row holds document IDs, the first column holds
      terms.

    Parameters
    ----------
    path : str
        Term-document file.
    labels_path : str
        Optional ``doc_id,class`` CSV. Every document must have a label.

    Returns
    -------
    tuple
        ``(X, vocabulary, labels)``. ``labels`` is None when
        ``labels_path`` is not given.

    Raises
    ------
    :class:`ParseError<neural_nmf.exception.ParseError>`
    :class:`NegativeEntry<neural_nmf.exception.NegativeEntry>`
    """
    if path.endswith('.mtx'):
        X, vocabulary, doc_ids = _load_matrix_market(path)
    else:
        X, vocabulary, doc_ids = _load_dense_csv(path)
    if X.size and X.min() < 0:
        raise exception.NegativeEntry(
            '%s has minimum value %g' % (path, X.min()))
    labels = None if labels_path is None else _align_labels(labels_path, doc_ids)
    _LG.info(
        'Loaded %d terms x %d documents from %s', X.shape[0], X.shape[1], path)
    return X, vocabulary, labels


def _is_plain_matrix(path):
    with open(path, 'r', newline='') as fileobj:
        first = next(csv.reader(fileobj), None)
    if not first:
        return True
    try:
        float(first[0])
    except ValueError:
        return False
    return True


def is_term_doc(path):
    """True if :func:`load_dataset` reads ``path`` as a term-document file."""
    return path.endswith('.mtx') or not _is_plain_matrix(path)


def load_dataset(path, labels_path=None):
    """Load data written by :func:`write_matrix` or a term-document file.

    A CSV whose first field is numeric is read as a plain matrix with
    documents identified by column index. Anything else goes through
    :func:`load_term_doc`.

    Returns
    -------
    tuple
        ``(X, vocabulary, labels)``
    """
    if is_term_doc(path):
        return load_term_doc(path, labels_path)
    X = read_matrix(path)
    if X.min() < 0:
        raise exception.NegativeEntry(
            '%s has minimum value %g' % (path, X.min()))
    doc_ids = [str(i) for i in range(X.shape[1])]
    labels = None if labels_path is None else _align_labels(labels_path, doc_ids)
    vocabulary = [str(i) for i in range(X.shape[0])]
    _LG.info('Loaded %s matrix from %s', X.shape, path)
    return X, vocabulary, labels
