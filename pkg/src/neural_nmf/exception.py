"""Defines exceptions commonly used in neural_nmf module."""


class NMFException:
    """Base exception for Neural NMF specific exception."""
    pass


class ShapeMismatch(NMFException, ValueError):
    """Operands have incompatible shapes"""
    def __init__(self, message):
        super().__init__('Shape mismatch; %s' % message)


class IndexOutOfRange(NMFException, IndexError):
    """Index set refers to positions outside of the indexed dimension"""
    def __init__(self, message):
        super().__init__('Index out of range; %s' % message)


class NegativeEntry(NMFException, ValueError):
    """Matrix expected to be nonnegative has a negative entry"""
    def __init__(self, message):
        super().__init__('Negative entry found; %s' % message)


class InvalidRank(NMFException, ValueError):
    """Requested factorization rank is not valid for the data"""
    pass


class InvalidFraction(NMFException, ValueError):
    """Fraction of known labels is outside of [0, 1]"""
    pass


class RankDeficient(NMFException, ArithmeticError):
    """Matrix is (numerically) rank deficient

    :ivar int layer: Index of the offending layer, None if not applicable.
    """
    def __init__(self, message, layer=None):
        if layer is not None:
            message = 'layer %d: %s' % (layer, message)
        super().__init__('Rank deficient matrix; %s' % message)
        self.layer = layer


class NonConvergence(NMFException, RuntimeError):
    """Iterative solver did not reach optimality"""
    pass


class Divergence(NMFException, RuntimeError):
    """Training loss blew up"""
    pass


class InconsistentStack(NMFException, RuntimeError):
    """S matrices are not the NNLS solutions of the current A matrices"""
    pass


class ParseError(NMFException, ValueError):
    """Input file could not be parsed

    :ivar str path: Path of the file.
    :ivar int line: 1-based line number, None if unknown.
    """
    def __init__(self, path, line, message):
        where = path if line is None else '%s:%d' % (path, line)
        super().__init__('Failed to parse %s; %s' % (where, message))
        self.path = path
        self.line = line


class ConfigError(NMFException, ValueError):
    """Invalid run, training or loss configuration"""
    pass
