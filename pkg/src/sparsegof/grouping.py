"""Equal-probability grouping of samples on [0, 1].

Raw observations are pushed through the hypothesised CDF, after which the
null hypothesis is uniformity and the cells are ``[m/N, (m+1)/N)``.  The
right end point 1.0 belongs to the last cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable

import numpy as np


@dataclass(frozen=True)
class CellPartition:
    """N equal-width cells on [0, 1]."""

    N: int
    boundaries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        b = np.asarray(self.boundaries, dtype=float)
        if b.shape != (self.N + 1,) or b[0] != 0.0 or b[-1] != 1.0:
            raise ValueError("boundaries must be N+1 points from 0 to 1")
        if np.any(np.diff(b) <= 0):
            raise ValueError("boundaries must be strictly increasing")


@dataclass(frozen=True)
class GroupedCounts:
    """Occupancy vector (η_1, ..., η_N) of a sample of size n."""

    counts: np.ndarray
    n: int

    def __post_init__(self) -> None:
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("counts must be a non-empty 1-d vector")
        if np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0)):
            raise ValueError("counts must be non-negative integers")
        object.__setattr__(self, "counts", c.astype(np.int64))
        if int(self.counts.sum()) != self.n:
            raise ValueError(f"counts sum to {int(self.counts.sum())}, expected n={self.n}")

    @classmethod
    def from_counts(cls, counts: Iterable[int]) -> "GroupedCounts":
        c = np.asarray(list(counts), dtype=np.int64)
        return cls(c, int(c.sum()))

    @property
    def N(self) -> int:
        return int(self.counts.size)

    @property
    def lam(self) -> float:
        return self.n / self.N

    @property
    def lam_exact(self) -> Fraction:
        return Fraction(self.n, self.N)

    @property
    def degenerate(self) -> bool:
        return self.n == 0


def make_equal_cells(N: int) -> CellPartition:
    if N < 1:
        raise ValueError(f"need at least one cell, got N={N}")
    return CellPartition(N, np.arange(N + 1) / N)


def transform_sample(raw, cdf: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Probability integral transform ``u_i = cdf(x_i)``."""
    x = np.asarray(raw, dtype=float)
    u = np.asarray(cdf(x), dtype=float)
    if u.shape != x.shape:
        raise ValueError("cdf must preserve the shape of its input")
    bad = np.flatnonzero(~((u >= 0.0) & (u <= 1.0)))
    if bad.size:
        raise ValueError(f"cdf produced value {u[bad[0]]!r} outside [0, 1] at index {bad[0]}")
    return u


def count_occupancy(sample, partition: CellPartition) -> GroupedCounts:
    """Count sample values per cell.

    Cells are half-open ``[a, b)``; the value 1.0 is assigned to the last cell.
    An empty sample gives all-zero counts flagged ``degenerate``.
    """
    u = np.asarray(sample, dtype=float).ravel()
    bad = np.flatnonzero(~((u >= 0.0) & (u <= 1.0)))
    if bad.size:
        raise ValueError(f"sample value {u[bad[0]]!r} at index {bad[0]} lies outside [0, 1]")
    idx = np.searchsorted(partition.boundaries, u, side="right") - 1
    idx = np.minimum(idx, partition.N - 1)
    counts = np.bincount(idx, minlength=partition.N)
    return GroupedCounts(counts, int(u.size))


def read_sample(path: str | Path) -> np.ndarray:
    """Read newline-delimited decimal numbers; blank lines are skipped."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        try:
            values.append(float(s))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a number: {s!r}") from None
    return np.asarray(values, dtype=float)
