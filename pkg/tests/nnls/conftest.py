"""Define helpers for testing nnls module"""
import itertools

import numpy as np


def exhaustive_nnls(A, x):
    """Solve NNLS by enumerating every support.

    Returns the coefficients and support of the feasible least squares
    solution with the smallest residual.
    """
    k = A.shape[1]
    best, best_res = np.zeros(k), float(np.sum(x ** 2))
    for size in range(1, k + 1):
        for supp in itertools.combinations(range(k), size):
            supp = list(supp)
            coef = np.linalg.lstsq(A[:, supp], x, rcond=None)[0]
            if np.any(coef <= 0):
                continue
            res = float(np.sum((x - A[:, supp] @ coef) ** 2))
            if res < best_res:
                best = np.zeros(k)
                best[supp] = coef
                best_res = res
    return best, np.flatnonzero(best > 0)
