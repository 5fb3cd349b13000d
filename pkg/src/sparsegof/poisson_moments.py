"""Truncated-series Poisson moment calculus for symmetric statistics.

With ξ ~ Poi(λ) the quantities governing an h-test are

* ``γ = cov(h(ξ), ξ) / λ``,
* ``g(ξ) = h(ξ) - E h(ξ) - γ (ξ - λ)`` and ``σ²(h) = Var g(ξ)``,
* ``ρ(h, λ) = corr(g(ξ), ξ² - (2λ + 1) ξ)``,
* ``L_3 = E|g(ξ)|³ / (σ³(h) √N)``.

Every expectation is a finite sum over ``[K_lo, K_hi]`` around λ.  Sums are
taken in the centred variable ``u = ξ - λ`` so that large λ does not cancel
catastrophically.  The neglected mass is bounded with a kernel envelope.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil, floor, sqrt
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import binom, poisson

from .enumeration import compositions, multinomial_logpmf
from .errors import DegenerateCountsError
from .statistics import HFunction, resolve_kernel

DEFAULT_TOL = 1e-12
ORACLE_MAX_N = 12
ORACLE_MAX_CELLS = 5
_MAX_EXTENSIONS = 200


@dataclass(frozen=True)
class PoissonSum:
    value: float
    lower_index: int
    upper_index: int
    tail_bound: float


def _default_envelope(f: Callable, lam: float) -> Callable:
    # Heuristic when the caller gives no envelope: a degree-6 polynomial
    # through the largest |f| seen on the central window.
    k = np.arange(0, int(ceil(lam + 12 * sqrt(lam) + 40)) + 1, dtype=float)
    c = float(np.max(np.abs(f(k)) / (1.0 + k) ** 6))
    return lambda kk: c * (1.0 + np.asarray(kk, dtype=float)) ** 6


def _support(lam: float, tol: float, envelope: Callable) -> tuple[int, int, float]:
    """Pick [lo, hi] so the envelope-weighted Poisson mass outside is < tol."""
    spread = 12.0 * sqrt(lam) + 40.0
    hi = int(ceil(lam + spread))
    lo = max(0, int(floor(lam - spread)))
    step = int(ceil(sqrt(lam))) + 10
    for _ in range(_MAX_EXTENSIONS):
        nxt = np.array([hi + 1, hi + 2], dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            env = np.asarray(envelope(nxt), dtype=float)
        if not np.all(np.isfinite(env)):
            raise ValueError(f"envelope overflows at k={hi + 1}; no usable tail bound at lambda={lam}")
        t1 = float(env[0] * poisson.pmf(hi + 1, lam))
        ratio = lam / (hi + 2) * float(env[1] / env[0]) if env[0] > 0 else 0.0
        upper = t1 / (1.0 - ratio) if ratio < 1.0 else np.inf
        lower = 0.0
        if lo > 0:
            lower = float(envelope(np.array([lo], dtype=float))[0] * poisson.cdf(lo - 1, lam))
        if upper + lower < tol:
            return lo, hi, upper + lower
        if upper >= lower:
            hi += step
        else:
            lo = max(0, lo - step)
    raise ValueError(f"envelope does not yield a convergent tail bound at lambda={lam}")


def poisson_expectation(f: Callable, lam: float, tol: float = DEFAULT_TOL, envelope: Callable | None = None) -> PoissonSum:
    """E f(ξ) for ξ ~ Poi(λ) by a truncated sum.

    ``envelope`` must bound ``|f|`` and be non-decreasing with a non-increasing
    term ratio beyond the cut (true for polynomial and ``u log u`` growth).
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    env = envelope if envelope is not None else _default_envelope(f, lam)
    lo, hi, bound = _support(lam, tol, env)
    k = np.arange(lo, hi + 1, dtype=float)
    w = poisson.pmf(k, lam)
    return PoissonSum(float(np.dot(w, f(k))), lo, hi, bound)


@dataclass(frozen=True)
class MomentSummary:
    lam: float
    Eh: float
    gamma_coef: float
    sigma2: float
    rho: float
    L3N: float
    var_h: float
    corr_h_xi: float
    truncation_bound: int
    tail_mass_bound: float


@lru_cache(maxsize=4096)
def _moments(h: HFunction, lam: float, tol: float) -> tuple:
    if h.envelope is not None:
        h_env = lambda k: h.envelope(k, lam)  # noqa: E731
    else:
        h_env = _default_envelope(lambda k: h(k, lam), lam)

    def combined(k):
        # bounds every product used below: |g|^3, |g| u^2, h^2
        k = np.asarray(k, dtype=float)
        return (1.0 + h_env(k)) ** 3 * (1.0 + k + lam) ** 6

    lo, hi, bound = _support(lam, tol, combined)
    k = np.arange(lo, hi + 1, dtype=float)
    w = poisson.pmf(k, lam)
    u = k - lam
    hv = h(k, lam)
    Eh = float(w @ hv)
    hc = hv - Eh
    cov = float(w @ (hc * u))
    gamma_coef = cov / lam
    g = hc - gamma_coef * u
    sigma2 = float(w @ (g * g))
    var_h = float(w @ (hc * hc))
    if not sigma2 > 1e-14 * max(var_h, 1e-300):
        raise ValueError(f"sigma^2(h) vanishes for kernel {h.name!r}: h is linear in effect")
    wv = u * u - u - lam  # centred xi^2 - (2 lam + 1) xi
    rho = float(w @ (g * wv)) / sqrt(sigma2 * float(w @ (wv * wv)))
    third = float(w @ np.abs(g) ** 3)
    corr_h_xi = cov / sqrt(var_h * lam) if var_h > 0 else 0.0
    return Eh, gamma_coef, sigma2, rho, third, var_h, corr_h_xi, hi, bound


def moment_summary(h: HFunction | str, lam: float, N: int = 1, tol: float = DEFAULT_TOL) -> MomentSummary:
    """Poisson moment bundle of kernel ``h`` at λ; ``L3N`` uses the given N."""
    h = resolve_kernel(h)
    if h.is_linear:
        raise ValueError(f"kernel {h.name!r} is linear")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    Eh, gam, s2, rho, third, var_h, corr, hi, bound = _moments(h, float(lam), float(tol))
    rho = min(1.0, max(-1.0, rho))
    L3N = third / s2**1.5 / sqrt(N)
    return MomentSummary(float(lam), Eh, gam, s2, rho, L3N, var_h, corr, hi, bound)


def rho(h: HFunction | str, lam: float) -> float:
    return moment_summary(h, lam).rho


class NullMoments(NamedTuple):
    mean: float
    var: float
    method: str
    degenerate: bool = False


def _binomial_window(n: int, p: float) -> np.ndarray:
    mu = n * p
    sd = sqrt(max(n * p * (1 - p), 0.0))
    lo = max(0, int(floor(mu - 12 * sd - 40)))
    hi = min(n, int(ceil(mu + 12 * sd + 40)))
    return np.arange(lo, hi + 1)


def marginal_mean(h: HFunction | str, n: int, p) -> float:
    """Exact ``E S_N^h = sum_m E h(Bin(n, p_m); n/N)`` under cell probabilities p.

    Sums run over ``np ± (12 sd + 40)``; the neglected binomial mass is far
    below double precision.
    """
    h = resolve_kernel(h)
    p = np.asarray(p, dtype=float)
    lam = n / p.size
    total = 0.0
    for pm in np.unique(p):
        k = _binomial_window(n, pm)
        total += np.count_nonzero(p == pm) * float(binom.pmf(k, n, pm) @ h(k, lam))
    return total


def marginal_null_moments(h: HFunction | str, n: int, N: int) -> NullMoments:
    """Exact null mean and variance from binomial and trinomial marginals."""
    h = resolve_kernel(h)
    if N == 1:
        return NullMoments(float(h(np.array(n), float(n))), 0.0, "marginal", True)
    p = 1.0 / N
    lam = n / N
    k = _binomial_window(n, p)
    w = binom.pmf(k, n, p)
    hv = h(k, lam)
    Eh = float(w @ hv)
    hc = hv - Eh
    var1 = float(w @ (hc * hc))
    # cov(h(η1), h(η2)) = sum_i P(η1 = i) hc(i) E[hc(η2) | η1 = i],
    # with η2 | η1 = i ~ Bin(n - i, p / (1 - p)).
    q = p / (1.0 - p)
    cov = 0.0
    for i, wi, hci in zip(k, w, hc):
        kk = _binomial_window(int(n - i), q)
        cond = float(binom.pmf(kk, n - i, q) @ h(kk, lam)) - Eh
        cov += wi * hci * cond
    return NullMoments(N * Eh, float(N * var1 + N * (N - 1) * cov), "marginal")


def enumerated_null_moments(h: HFunction | str, n: int, N: int) -> NullMoments:
    h = resolve_kernel(h)
    comp = compositions(n, N)
    pmf = np.exp(multinomial_logpmf(comp, np.full(N, 1.0 / N)))
    s = np.sum(h(comp, n / N), axis=1)
    mean = float(pmf @ s)
    var = float(pmf @ (s - mean) ** 2)
    return NullMoments(mean, var, "enumerate", N == 1)


def null_moments(h: HFunction | str, n: int, N: int, mode: str = "auto") -> NullMoments:
    """Null mean and variance of ``S_N^h``.

    ``mode``: ``"poisson"`` gives ``(N E h(ξ), N σ²(h))``; ``"enumerate"`` is the
    brute-force oracle (n <= 12, N <= 5); ``"marginal"`` is exact for any n via
    binomial/trinomial sums; ``"auto"`` enumerates inside the oracle range and
    uses the Poisson form elsewhere.  N = 1 is flagged degenerate.
    """
    h = resolve_kernel(h)
    if n < 1 or N < 1:
        raise DegenerateCountsError(f"need n, N >= 1, got n={n}, N={N}")
    if N == 1:
        return NullMoments(float(h(np.array(n), float(n))), 0.0, "degenerate", True)
    if mode == "auto":
        mode = "enumerate" if (n <= ORACLE_MAX_N and N <= ORACLE_MAX_CELLS) else "poisson"
    if mode == "poisson":
        ms = moment_summary(h, n / N, N)
        return NullMoments(N * ms.Eh, N * ms.sigma2, "poisson")
    if mode == "enumerate":
        if n > ORACLE_MAX_N or N > ORACLE_MAX_CELLS:
            raise ValueError(f"enumeration oracle limited to n <= {ORACLE_MAX_N}, N <= {ORACLE_MAX_CELLS}")
        return enumerated_null_moments(h, n, N)
    if mode == "marginal":
        return marginal_null_moments(h, n, N)
    raise ValueError(f"unknown mode {mode!r}")


def shift_xn(h: HFunction | str, n: int, N: int, delta: float, d2: float = 1.0) -> float:
    """Leading term of the standardised mean shift, ``sqrt(nλ/2) δ² d² ρ(h, λ)``.

    ``d2 = 1`` is the normalised form; pass the finite-N contrast
    ``N^{-1} sum d_m²`` for the contrast-weighted variant.
    """
    if delta == 0:
        return 0.0
    lam = n / N
    return sqrt(n * lam / 2.0) * delta**2 * d2 * rho(h, lam)


def lyapunov_check(h: HFunction | str, n: int, N: int) -> float:
    """``L_{3,N}`` at λ = n/N; values below 0.1 are treated as the CLT regime."""
    return moment_summary(h, n / N, N).L3N
