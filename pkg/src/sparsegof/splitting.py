"""Adaptive multilevel splitting for multinomial tail probabilities.

Estimates ``P{score(η) >= threshold}`` for ``η ~ Multinomial(n, p)``.  Each
run keeps M particles.  At every stage the level ``z`` is the k-th smallest
score (k = M/2).  All particles with score ``<= z`` are killed.  The running
weight is multiplied by ``1 - K/M``, with K the number killed; ties make K
random, which keeps the estimator unbiased on lattice statistics.  Killed
particles are replaced by clones of survivors.  The clones are moved with a
Markov kernel that leaves the multinomial law conditioned on ``score > z``
invariant.  When the level reaches the threshold, the run returns
``weight * fraction(score >= threshold)``.  If every particle ties at the
level, the run returns 0 (extinction), which keeps the estimator unbiased.

The kernel is thin-and-refill: each ball is removed independently with
probability r and the removed balls are relabelled iid from p.  This is a
Gibbs update of a random subset of ball labels, so it is reversible with
respect to the multinomial.  Proposals landing at ``<= z`` are rejected, and
r adapts towards a moderate acceptance rate.

Independent runs give unbiased estimates.  The reported interval is
log-normal, built from their mean and standard error.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, log, sqrt
from typing import Callable

import numpy as np
from scipy.stats import t as student_t

from ._seeding import make_rng

Score = Callable[[np.ndarray], np.ndarray]

DEFAULT_RUNS = 20
DEFAULT_MCMC_STEPS = 5
LEVEL_ALLOWANCE = 20
MIN_PARTICLES = 32
MAX_LEVELS = 400


@dataclass(frozen=True)
class SplittingResult:
    p_hat: float
    ci_low: float
    ci_high: float
    run_estimates: tuple[float, ...]
    levels: tuple[int, ...]
    n_particles: int
    evaluations: int
    converged: bool

    @property
    def upper_bound(self) -> bool:
        """True when no run reached the threshold: ``ci_high`` is only a bound."""
        return not self.converged or self.p_hat == 0.0


def particles_for_budget(budget: int, n_runs: int, mcmc_steps: int) -> int:
    """Particles per run so that ``LEVEL_ALLOWANCE`` levels spend the budget.

    A run costs M initial evaluations plus ``mcmc_steps * M/2`` per level.
    """
    per_particle = 1 + mcmc_steps * LEVEL_ALLOWANCE / 2
    return max(MIN_PARTICLES, int(int(budget) // (n_runs * per_particle)))


def _move(x: np.ndarray, s: np.ndarray, z: float, p: np.ndarray, score: Score,
          rng: np.random.Generator, r: float, steps: int) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Constrained thin/refill moves; returns (x, s, acceptance rate, evaluations)."""
    accepted = 0
    for _ in range(steps):
        removed = rng.binomial(x, r)
        refill = rng.multinomial(removed.sum(axis=1), p)
        y = x - removed + refill
        sy = score(y)
        ok = sy > z
        x[ok] = y[ok]
        s[ok] = sy[ok]
        accepted += int(ok.sum())
    return x, s, accepted / (steps * x.shape[0]), steps * x.shape[0]


def _single_run(n: int, p: np.ndarray, score: Score, threshold: float, n_particles: int,
                mcmc_steps: int, rng: np.random.Generator, max_levels: int) -> tuple[float, float, int, int, bool]:
    """One splitting run: (estimate, upper bound, levels used, evaluations, converged).

    The bound is the weight reached at the last level, an estimate of the
    probability of exceeding that level and hence of the tail itself.
    """
    M = n_particles
    k = M // 2
    x = rng.multinomial(n, p, size=M)
    s = score(x)
    evals = M
    log_w = 0.0
    r = 0.3
    for level in range(max_levels):
        z = float(np.partition(s, k - 1)[k - 1])
        if z >= threshold:
            est = exp(log_w) * float(np.mean(s >= threshold))
            return est, est, level, evals, True
        killed = s <= z
        K = int(killed.sum())
        if K == M:
            return 0.0, exp(log_w), level, evals, True
        log_w += log(1.0 - K / M)
        survivors = np.flatnonzero(~killed)
        dead = np.flatnonzero(killed)
        parents = survivors[rng.integers(0, survivors.size, size=K)]
        x[dead] = x[parents]
        s[dead] = s[parents]
        xd, sd, acc, e = _move(x[dead], s[dead], z, p, score, rng, r, mcmc_steps)
        x[dead], s[dead] = xd, sd
        evals += e
        if acc < 0.2:
            r = max(r * 0.6, 1.0 / max(n, 1))
        elif acc > 0.4:
            r = min(r * 1.5, 1.0)
    return 0.0, exp(log_w), max_levels, evals, False


def lognormal_ci(estimates: np.ndarray, level: float = 0.95) -> tuple[float, float, float]:
    """Mean of replicate estimates with a log-normal interval (t quantile, R-1 df)."""
    R = estimates.size
    mean = float(estimates.mean())
    if mean <= 0.0:
        return 0.0, 0.0, 0.0
    if R < 2:
        return mean, mean, mean
    se = float(estimates.std(ddof=1)) / sqrt(R)
    s_log = sqrt(float(np.log1p((se / mean) ** 2)))
    q = float(student_t.ppf(0.5 + level / 2, R - 1))
    return mean, mean * exp(-q * s_log), min(1.0, mean * exp(q * s_log))


def splitting_tail(n: int, p, score: Score, threshold: float, budget: int, seed: int,
                   keys: tuple[int, ...] = (), n_runs: int = DEFAULT_RUNS,
                   mcmc_steps: int = DEFAULT_MCMC_STEPS, max_levels: int = MAX_LEVELS) -> SplittingResult:
    """Estimate ``P{score(η) >= threshold}``, η ~ Multinomial(n, p).

    Run j draws from ``make_rng(seed, *keys, j)``, so the result is fixed by
    ``(seed, keys)`` regardless of how runs are scheduled.  When some run
    fails to converge within ``max_levels``, the estimate is reported as an
    upper bound.
    """
    if n_runs < 2:
        raise ValueError("need at least 2 splitting runs for an interval")
    p = np.asarray(p, dtype=float)
    M = particles_for_budget(budget, n_runs, mcmc_steps)
    ests, bounds, levels = [], [], []
    evals = 0
    converged = True
    for j in range(n_runs):
        rng = make_rng(seed, *keys, j)
        est, bound, lv, ev, ok = _single_run(n, p, score, threshold, M, mcmc_steps, rng, max_levels)
        ests.append(est)
        bounds.append(bound)
        levels.append(lv)
        evals += ev
        converged &= ok
    arr = np.asarray(ests)
    mean, lo, hi = lognormal_ci(arr)
    if not converged or mean == 0.0:
        bound = float(np.max(bounds))
        return SplittingResult(0.0, 0.0, bound, tuple(ests), tuple(levels), M, evals, converged)
    return SplittingResult(mean, lo, hi, tuple(ests), tuple(levels), M, evals, True)
