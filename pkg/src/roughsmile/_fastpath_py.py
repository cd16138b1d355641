"""Pure-numpy fallback for the compiled hot kernels in ``_fastpath``.

Loops over the lag only; the inner scan over start indices is vectorized.
"""

import numpy as np


def max_weighted_increment(values, weights):
    """max over lags l=1..len(weights) and i of |x[i+l]-x[i]| * weights[l-1]."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    best = 0.0
    for lag in range(1, min(len(weights), n - 1) + 1):
        d = np.abs(values[lag:] - values[:-lag]).max(initial=0.0)
        best = max(best, d * weights[lag - 1])
    return float(best)


def batch_max_weighted_increment(values, weights):
    """Row-wise max_weighted_increment for a batch of paths."""
    values = np.asarray(values, dtype=np.float64)
    rows, n = values.shape
    best = np.zeros(rows)
    for lag in range(1, min(len(weights), n - 1) + 1):
        d = np.abs(values[:, lag:] - values[:, :-lag]).max(axis=1, initial=0.0)
        np.maximum(best, d * weights[lag - 1], out=best)
    return best
