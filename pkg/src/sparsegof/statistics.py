"""Chi-square, log-likelihood-ratio and general symmetric h-statistics.

A symmetric statistic is ``S = sum_m h(η_m)`` for a cell score ``h``.  Cell
scores receive the null expected count λ = n/N explicitly, so kernels such as
``(u - λ)²/λ`` need no global state.  All kernels are vectorised: they accept
integer arrays of any shape and return arrays of the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import xlogy

from .errors import DegenerateCountsError
from .grouping import GroupedCounts

Kernel = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True, eq=False)
class HFunction:
    """Cell score h(u; λ) defining ``S_N^h``.

    ``envelope(k, lam)`` is an optional non-decreasing bound on ``|h(k)|`` used
    to certify truncation of Poisson sums.  Identity-based equality keeps
    instances hashable for moment caches.
    """

    name: str
    eval: Kernel = field(repr=False)
    is_linear: bool = False
    envelope: Callable[[np.ndarray, float], np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, u, lam: float) -> np.ndarray:
        return self.eval(np.asarray(u), lam)


def _chi2_kernel(u, lam):
    return (u - lam) ** 2 / lam


def _lr_kernel(u, lam):
    # 0 * log 0 := 0
    return 2.0 * xlogy(u, u / lam)


def _empty_kernel(u, lam):
    return (u == 0).astype(float)


CHI2 = HFunction(
    "chi2",
    _chi2_kernel,
    envelope=lambda k, lam: (k + lam) ** 2 / lam,
)
LR = HFunction(
    "lr",
    _lr_kernel,
    envelope=lambda k, lam: 2.0 * (k + 1.0) * (np.log1p(k) + abs(np.log(lam)) + 1.0),
)
EMPTY_CELLS = HFunction("empty", _empty_kernel, envelope=lambda k, lam: np.ones_like(k, dtype=float))

KERNELS: dict[str, HFunction] = {h.name: h for h in (CHI2, LR, EMPTY_CELLS)}


def resolve_kernel(test: str | HFunction) -> HFunction:
    if isinstance(test, HFunction):
        return test
    try:
        return KERNELS[test]
    except KeyError:
        raise ValueError(f"unknown kernel {test!r}; known: {sorted(KERNELS)}") from None


@dataclass(frozen=True)
class StatisticValue:
    value: float
    statistic: str
    n: int
    N: int


def _expected(counts: GroupedCounts, p) -> np.ndarray:
    if counts.degenerate:
        raise DegenerateCountsError("statistic undefined for n = 0")
    p = np.asarray(p, dtype=float)
    if p.shape != counts.counts.shape:
        raise ValueError(f"p has shape {p.shape}, counts have {counts.counts.shape}")
    expected = counts.n * p
    if np.any(expected <= 0):
        raise ValueError("every expected count n*p_m must be positive")
    return expected


def chi_square(counts: GroupedCounts, p) -> StatisticValue:
    """Pearson's ``sum (η_m - n p_m)² / (n p_m)``."""
    e = _expected(counts, p)
    value = float(np.sum((counts.counts - e) ** 2 / e))
    return StatisticValue(value, "chi2", counts.n, counts.N)


def log_likelihood_ratio(counts: GroupedCounts, p) -> StatisticValue:
    """``2 sum η_m log(η_m / (n p_m))`` with empty cells contributing 0."""
    e = _expected(counts, p)
    eta = counts.counts.astype(float)
    value = float(2.0 * np.sum(xlogy(eta, eta / e)))
    # Gibbs' inequality gives value >= 0; clip rounding noise at exact fits.
    return StatisticValue(max(value, 0.0), "lr", counts.n, counts.N)


def h_statistic(counts: GroupedCounts, h: HFunction | str) -> StatisticValue:
    """``S_N^h = sum h(η_m; λ)`` with λ = n/N (equal cells)."""
    h = resolve_kernel(h)
    if h.is_linear:
        raise ValueError(f"kernel {h.name!r} is linear; the h-test is undefined")
    if counts.degenerate:
        raise DegenerateCountsError("statistic undefined for n = 0")
    value = float(np.sum(h(counts.counts, counts.lam)))
    return StatisticValue(value, h.name, counts.n, counts.N)


def h_statistic_batch(counts: np.ndarray, h: HFunction, lam: float) -> np.ndarray:
    """Row-wise ``S_N^h`` for a (batch, N) array of count vectors."""
    return np.sum(h(counts, lam), axis=-1)


def standardize(s: StatisticValue | float, mean0: float, var0: float) -> float:
    """``(S - E_0 S) / sqrt(Var_0 S)``."""
    if not var0 > 0:
        raise ValueError(f"null variance must be positive, got {var0}")
    value = s.value if isinstance(s, StatisticValue) else float(s)
    return (value - mean0) / np.sqrt(var0)
