"""Brute-force enumeration of multinomial outcomes (oracle machinery)."""

from __future__ import annotations

from math import comb

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import InstanceTooLargeError

MAX_COMPOSITIONS = 10**6


def composition_count(n: int, N: int) -> int:
    """Number of ways to place n indistinguishable balls in N cells."""
    return comb(n + N - 1, N - 1)


def compositions(n: int, N: int, limit: int = MAX_COMPOSITIONS) -> np.ndarray:
    """All count vectors of length N summing to n, as a (K, N) int array."""
    if n < 0 or N < 1:
        raise ValueError(f"need n >= 0 and N >= 1, got n={n}, N={N}")
    k = composition_count(n, N)
    if k > limit:
        raise InstanceTooLargeError(f"C(n+N-1, N-1) = {k} compositions exceeds limit {limit}")
    # rows[j] holds all compositions of j into the trailing cells built so far
    rows = [np.array([[j]], dtype=np.int64) for j in range(n + 1)]
    for width in range(2, N + 1):
        new = []
        for total in range(n + 1):
            blocks = []
            for first in range(total, -1, -1):
                tail = rows[total - first]
                head = np.full((tail.shape[0], 1), first, dtype=np.int64)
                blocks.append(np.hstack([head, tail]))
            new.append(np.vstack(blocks))
        rows = new
        del new
    return rows[n]


def multinomial_logpmf(counts: np.ndarray, p) -> np.ndarray:
    """Log multinomial pmf for each row of ``counts``."""
    counts = np.asarray(counts)
    p = np.asarray(p, dtype=float)
    n = counts.sum(axis=-1)
    return gammaln(n + 1.0) - gammaln(counts + 1.0).sum(axis=-1) + xlogy(counts, p).sum(axis=-1)
