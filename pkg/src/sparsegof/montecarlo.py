"""Multinomial sampling and tail-probability estimation.

Three estimators share one interface (:func:`estimate_tail`):

* ``EXACT`` sums the multinomial pmf over all compositions,
* ``NAIVE`` counts hits among iid draws (Wilson interval),
* ``SPLITTING`` runs adaptive multilevel splitting (log-normal interval).

Statistics are always referenced to the uniform null: ``S = Σ h(η_m; n/N)``,
whatever the sampling probabilities.  Events are non-strict (``S >= t``) by
default.  Comparisons allow a relative slack of 1e-9, so lattice values
computed along different floating-point paths still compare equal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import exp, fsum, inf, isinf, log, sqrt

import numpy as np
from scipy.stats import binomtest

from . import splitting
from ._seeding import make_rng
from .alternatives import AlternativeSpec, FamilyTag, cell_probabilities, contrast_d2
from .enumeration import MAX_COMPOSITIONS, composition_count, compositions, multinomial_logpmf
from .errors import InsufficientBudgetError, UnsupportedPredictionError
from .grouping import GroupedCounts
from .largedev import predict_alpha_slope
from .poisson_moments import (
    ORACLE_MAX_CELLS,
    ORACLE_MAX_N,
    marginal_mean,
    null_moments,
    shift_xn,
)
from .statistics import HFunction, resolve_kernel

LATTICE_RTOL = 1e-9
MIN_EXPECTED_HITS = 10
AUTO_EXACT_LIMIT = 10**5
NAIVE_CHUNK = 1 << 14


class Method(str, enum.Enum):
    EXACT = "EXACT"
    NAIVE = "NAIVE"
    SPLITTING = "SPLITTING"


@dataclass(frozen=True)
class TailEstimate:
    p_hat: float
    log_p_hat: float
    ci_low: float
    ci_high: float
    method: Method
    replicates: int
    seed: int | None
    upper_bound: bool = False

    def __post_init__(self) -> None:
        if not (self.ci_low <= self.p_hat <= self.ci_high):
            raise ValueError(f"interval [{self.ci_low}, {self.ci_high}] excludes estimate {self.p_hat}")

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


def _log(p: float) -> float:
    return log(p) if p > 0 else -inf


def _check_p(p, N: int | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("p must be a non-empty probability vector")
    if N is not None and p.size != N:
        raise ValueError(f"p has {p.size} entries, expected N={N}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("p must be non-negative and sum to 1")
    return p


def sample_multinomial(n: int, p, seed: int, keys: tuple[int, ...] = ()) -> GroupedCounts:
    """One multinomial draw by the sequential conditional-binomial scheme."""
    p = _check_p(p)
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    rng = make_rng(seed, *keys)
    counts = np.zeros(p.size, dtype=np.int64)
    remaining, mass = n, 1.0
    for m in range(p.size - 1):
        if remaining == 0:
            break
        q = min(1.0, p[m] / mass) if mass > 0 else 0.0
        counts[m] = rng.binomial(remaining, q)
        remaining -= counts[m]
        mass -= p[m]
    counts[-1] += remaining
    return GroupedCounts(counts, n)


# ---------------------------------------------------------------------------
# Events


@dataclass(frozen=True)
class _Event:
    """``S >= t`` (upper) or ``S <= t`` (lower), optionally strict."""

    h: HFunction
    lam: float
    threshold: float
    tail: str = "upper"
    strict: bool = False
    slack: float = field(init=False)

    def __post_init__(self) -> None:
        if self.tail not in ("upper", "lower"):
            raise ValueError(f"tail must be 'upper' or 'lower', got {self.tail!r}")
        t = self.threshold
        object.__setattr__(self, "slack", 0.0 if isinf(t) else LATTICE_RTOL * max(1.0, abs(t)))

    def statistic(self, x: np.ndarray) -> np.ndarray:
        return np.sum(self.h(x, self.lam), axis=-1)

    def hits(self, s: np.ndarray) -> np.ndarray:
        t, e = self.threshold, self.slack
        if self.tail == "upper":
            return s > t + e if self.strict else s >= t - e
        return s < t - e if self.strict else s <= t + e

    def splitting_problem(self):
        """(score, level) with ``hits(S) <=> score >= level``."""
        t, e = self.threshold, self.slack
        if self.tail == "upper":
            # strict S > t on a lattice: shift the level just past t
            level = t + 2 * e if self.strict else t - e
            return self.statistic, level
        level = -t + 2 * e if self.strict else -t - e
        return (lambda x: -self.statistic(x)), level


def _make_event(n: int, N: int, stat, threshold: float, tail: str, strict: bool) -> _Event:
    h = resolve_kernel(stat)
    if h.is_linear:
        raise ValueError(f"kernel {h.name!r} is linear")
    if n < 1 or N < 1:
        raise ValueError(f"need n, N >= 1, got n={n}, N={N}")
    return _Event(h, n / N, float(threshold), tail, strict)


def exact_tail(n: int, N: int, p, stat, threshold: float, strict: bool = False, tail: str = "upper",
               limit: int = MAX_COMPOSITIONS) -> TailEstimate:
    """Exact ``P{S >= threshold}`` (or the selected variant) by enumeration."""
    p = _check_p(p, N)
    ev = _make_event(n, N, stat, threshold, tail, strict)
    comp = compositions(n, N, limit)
    mask = ev.hits(ev.statistic(comp))
    if mask.all():
        prob = 1.0
    elif not mask.any():
        prob = 0.0
    else:
        prob = min(1.0, fsum(np.exp(multinomial_logpmf(comp[mask], p))))
    return TailEstimate(prob, _log(prob), prob, prob, Method.EXACT, 1, None)


# ---------------------------------------------------------------------------
# Naive Monte Carlo


def _moments_under(h: HFunction, n: int, N: int, p: np.ndarray) -> tuple[float, float]:
    """Mean of S under p (exact) and a variance proxy (exact null variance)."""
    mode = "enumerate" if (n <= ORACLE_MAX_N and N <= ORACLE_MAX_CELLS) else "marginal"
    nm = null_moments(h, n, N, mode=mode if N > 1 else "auto")
    return marginal_mean(h, n, p), nm.var


def _cantelli_bound(ev: _Event, mean: float, var: float) -> float:
    gap = ev.threshold - mean if ev.tail == "upper" else mean - ev.threshold
    if gap <= 0 or var <= 0:
        return 1.0
    return var / (var + gap * gap)


def naive_precheck(n: int, N: int, p, stat, threshold: float, budget: int, tail: str = "upper") -> float:
    """Expected-hit upper bound ``budget * Cantelli``; raises when below 10."""
    p = _check_p(p, N)
    ev = _make_event(n, N, stat, threshold, tail, False)
    mean, var = _moments_under(ev.h, n, N, p)
    expected = budget * _cantelli_bound(ev, mean, var)
    if expected < MIN_EXPECTED_HITS:
        raise InsufficientBudgetError(
            f"naive MC expects at most {expected:.3g} hits at budget {budget}; use SPLITTING")
    return expected


def _naive(n: int, p: np.ndarray, ev: _Event, budget: int, seed: int, keys: tuple[int, ...]) -> TailEstimate:
    rng = make_rng(seed, *keys)
    hits, done = 0, 0
    while done < budget:
        size = min(NAIVE_CHUNK, budget - done)
        x = rng.multinomial(n, p, size=size)
        hits += int(ev.hits(ev.statistic(x)).sum())
        done += size
    ci = binomtest(hits, budget).proportion_ci(confidence_level=0.95, method="wilson")
    p_hat = hits / budget
    return TailEstimate(p_hat, _log(p_hat), min(ci.low, p_hat), max(ci.high, p_hat), Method.NAIVE,
                        budget, seed, upper_bound=hits == 0)


def _splitting(n: int, p: np.ndarray, ev: _Event, budget: int, seed: int, keys: tuple[int, ...]) -> TailEstimate:
    score, level = ev.splitting_problem()
    res = splitting.splitting_tail(n, p, score, level, budget, seed, keys)
    return TailEstimate(res.p_hat, _log(res.p_hat), res.ci_low, res.ci_high, Method.SPLITTING,
                        len(res.run_estimates), seed, upper_bound=res.upper_bound)


def estimate_tail(n: int, N: int, p, stat, threshold: float, method: str | Method = "auto",
                  budget: int = 10**5, seed: int = 0, keys: tuple[int, ...] = (), tail: str = "upper",
                  strict: bool = False) -> TailEstimate:
    """Estimate ``P_p{S >= threshold}`` (``tail="lower"``: ``S <= threshold``).

    ``method="auto"`` enumerates when there are at most 1e5 compositions,
    otherwise uses naive MC if the budget passes the hit pre-check, and
    splitting if not.  Naive MC refuses budgets whose Cantelli bound predicts
    fewer than 10 hits.
    """
    p = _check_p(p, N)
    if budget < 1:
        raise ValueError("budget must be positive")
    ev = _make_event(n, N, stat, threshold, tail, strict)
    if isinstance(method, str):
        method = method.upper()
    if method == "AUTO":
        if composition_count(n, N) <= AUTO_EXACT_LIMIT:
            method = Method.EXACT
        else:
            try:
                naive_precheck(n, N, p, stat, threshold, budget, tail)
                method = Method.NAIVE
            except InsufficientBudgetError:
                method = Method.SPLITTING
    method = Method(method)
    if method is Method.EXACT:
        return exact_tail(n, N, p, stat, threshold, strict, tail)
    if method is Method.NAIVE:
        naive_precheck(n, N, p, stat, threshold, budget, tail)
        return _naive(n, p, ev, budget, seed, keys)
    return _splitting(n, p, ev, budget, seed, keys)


# ---------------------------------------------------------------------------
# Slopes and power


@dataclass(frozen=True)
class ExperimentPoint:
    n: int
    N: int
    delta: float
    test: str
    family: str | None
    lam: float
    threshold: float
    threshold_mode: str
    slope_empirical: float
    slope_ci_low: float
    slope_ci_high: float
    slope_predicted: float | None
    regime: str | None
    estimate: TailEstimate


THRESHOLD_MODES = ("auto", "exact", "shift", "empirical")


def _in_oracle_range(n: int, N: int) -> bool:
    return n <= ORACLE_MAX_N and N <= ORACLE_MAX_CELLS


def alternative_mean(h: HFunction, n: int, N: int, spec: AlternativeSpec, mode: str, seed: int,
                     keys: tuple[int, ...], samples: int = 10**4) -> float:
    """``E_1 S`` by the selected rule.

    ``exact`` sums binomial marginals (exact for every n), ``shift`` is the
    Poisson form ``N Eh + x_n sqrt(N σ²)``, ``empirical`` averages simulated
    statistics, and ``auto`` is exact in the enumeration range and the shift
    elsewhere.
    """
    if mode not in THRESHOLD_MODES:
        raise ValueError(f"unknown threshold mode {mode!r}; expected one of {THRESHOLD_MODES}")
    if mode == "auto":
        mode = "exact" if _in_oracle_range(n, N) else "shift"
    p1 = cell_probabilities(spec, n, N)
    if mode == "exact":
        return marginal_mean(h, n, p1)
    if mode == "shift":
        nm = null_moments(h, n, N, mode="poisson")
        d2 = contrast_d2(spec, N) if spec.direction is not None or spec.cell_contrast is not None else 1.0
        return nm.mean + shift_xn(h, n, N, spec.delta(n, N), d2) * sqrt(nm.var)
    rng = make_rng(seed, *keys, 1 << 20)
    total, done = 0.0, 0
    while done < samples:
        size = min(NAIVE_CHUNK, samples - done)
        total += float(np.sum(h(rng.multinomial(n, p1, size=size), n / N)))
        done += size
    return total / samples


def null_mean(h: HFunction, n: int, N: int, mode: str) -> float:
    if mode == "auto":
        mode = "exact" if _in_oracle_range(n, N) else "shift"
    if mode in ("exact", "empirical"):
        return marginal_mean(h, n, np.full(N, 1.0 / N))
    return null_moments(h, n, N, mode="poisson").mean


def _slope(est: TailEstimate) -> tuple[float, float, float]:
    return -est.log_p_hat, -_log(est.ci_high), -_log(est.ci_low)


def estimate_alpha_slope(n: int, N: int, test, spec: AlternativeSpec, budget: int = 10**5, seed: int = 0,
                         keys: tuple[int, ...] = (), method: str = "auto", threshold_mode: str = "auto",
                         family: FamilyTag | None = None) -> ExperimentPoint:
    """Empirical ``-log P_0{S >= E_1 S}`` with the prediction when one applies."""
    h = resolve_kernel(test)
    delta = spec.delta(n, N)
    thr = alternative_mean(h, n, N, spec, threshold_mode, seed, keys)
    est = estimate_tail(n, N, np.full(N, 1.0 / N), h, thr, method, budget, seed, keys)
    predicted, regime = None, None
    if family is not None:
        try:
            pred = predict_alpha_slope(h, family, n, N, delta)
            predicted, regime = pred.value, pred.regime.value
        except UnsupportedPredictionError:
            pass
    slope, lo, hi = _slope(est)
    return ExperimentPoint(n, N, delta, h.name, None if family is None else str(family), n / N, thr,
                           threshold_mode, slope, lo, hi, predicted, regime, est)


def estimate_beta_slope(n: int, N: int, test, spec: AlternativeSpec, budget: int = 10**5, seed: int = 0,
                        keys: tuple[int, ...] = (), method: str = "auto", threshold_mode: str = "auto",
                        family: FamilyTag | None = None) -> ExperimentPoint:
    """Empirical ``-log P_1{S <= E_0 S}`` under the alternative cell probabilities."""
    h = resolve_kernel(test)
    delta = spec.delta(n, N)
    thr = null_mean(h, n, N, threshold_mode)
    p1 = cell_probabilities(spec, n, N)
    est = estimate_tail(n, N, p1, h, thr, method, budget, seed, keys, tail="lower")
    slope, lo, hi = _slope(est)
    return ExperimentPoint(n, N, delta, h.name, None if family is None else str(family), n / N, thr,
                           threshold_mode, slope, lo, hi, None, None, est)


def power_at_critical(n: int, N: int, test, spec: AlternativeSpec, c: float, budget: int = 10**4,
                      seed: int = 0, keys: tuple[int, ...] = (), method: str = "NAIVE") -> TailEstimate:
    """``P_1{Ŝ > x_n + c}`` with Ŝ standardised by the exact null moments.

    The shift is the exact ``x_n = (E_1 S - E_0 S) / sqrt(Var_0 S)``, so the
    rejection region is ``S > E_1 S + c sqrt(Var_0 S)``.
    """
    h = resolve_kernel(test)
    if c != c:
        raise ValueError("c must not be NaN")
    if isinf(c):
        prob = 0.0 if c > 0 else 1.0
        return TailEstimate(prob, _log(prob), prob, prob, Method.EXACT, 0, seed)
    mode = "enumerate" if _in_oracle_range(n, N) else "marginal"
    nm = null_moments(h, n, N, mode=mode)
    if nm.degenerate or not nm.var > 0:
        raise ValueError("null variance vanishes; standardisation undefined")
    p1 = cell_probabilities(spec, n, N)
    mean1 = marginal_mean(h, n, p1)
    thr = mean1 + c * sqrt(nm.var)
    ev = _make_event(n, N, h, thr, "upper", True)
    method = Method(method.upper()) if isinstance(method, str) else method
    if method is Method.EXACT:
        return exact_tail(n, N, p1, h, thr, strict=True)
    if method is Method.SPLITTING:
        return _splitting(n, p1, ev, budget, seed, keys)
    return _naive(n, p1, ev, budget, seed, keys)
