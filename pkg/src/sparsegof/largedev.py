"""Large-deviation log-tail approximations and slope/efficiency predictions.

Tail approximations all share the leading term ``-x²/2``.  The error terms
are known only up to unspecified constants, so they are reported as a
separate ``correction_bound`` (unit constants times ``multiplier``) and never
folded into ``log_prob``.  Asymptotic side conditions such as ``x = o(√N)``
become numeric margins compared against a threshold θ (default 0.3).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import exp, inf, isinf, log, pi, sqrt

from scipy.special import xlogy

from .alternatives import Family, FamilyTag, strip_condition
from .errors import OpenProblemError, UnsupportedPredictionError
from .poisson_moments import rho
from .statistics import HFunction, resolve_kernel

DEFAULT_THETA = 0.3
ASSERTIONS = ("A1", "A2", "A3", "A4", "A5", "NORMAL")


def normal_log_tail(x: float, refined: bool = False) -> float:
    """``-x²/2``, or with ``refined`` also ``- log(x √(2π))``."""
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    value = -0.5 * x * x
    if refined:
        value -= log(x * sqrt(2 * pi))
    return value


@dataclass(frozen=True)
class Condition:
    name: str
    relation: str  # "small": margin < threshold; "large": margin > 1/threshold
    margin: float
    passed: bool


@dataclass(frozen=True)
class DomainReport:
    assertion: str
    conditions: tuple[Condition, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def margins(self) -> dict[str, float]:
        return {c.name: c.margin for c in self.conditions}


@dataclass(frozen=True)
class TailApprox:
    log_prob: float
    leading: float
    correction_bound: float
    assertion: str


def _small(name: str, margin: float, theta: float) -> Condition:
    return Condition(name, "small", margin, margin < theta)


def _large(name: str, margin: float, theta: float) -> Condition:
    return Condition(name, "large", margin, margin > 1.0 / theta)


def tail_approx(assertion: str, x: float, n: int, N: int, multiplier: float = 1.0,
                theta: float = DEFAULT_THETA) -> tuple[TailApprox, DomainReport]:
    """Predicted ``log P{S > x sqrt(Var S) + E S}`` with its validity domain.

    A1: Cramér-class h, λ bounded; A2: χ², any λ; A3: Λ, λ → ∞;
    A4: χ², N = o(√n); A5: Λ, λ → ∞.  ``NORMAL`` is the plain Gaussian tail.
    """
    if assertion not in ASSERTIONS:
        raise ValueError(f"unknown assertion {assertion!r}; expected one of {ASSERTIONS}")
    if not x > 1:
        raise ValueError(f"tail argument must exceed 1, got {x}")
    lam = n / N
    leading = normal_log_tail(x)
    rootN = sqrt(N)
    if assertion == "A1":
        corr = log(x) + x**3 / rootN
        conds = [_small("x/sqrt(N)", x / rootN, theta)]
    elif assertion == "A2":
        corr = log(x)
        conds = [_small("x/(sqrt(N)*min(1,lambda^2))^(1/3)", x / (rootN * min(1.0, lam**2)) ** (1 / 3), theta)]
    elif assertion == "A3":
        corr = log(x)
        conds = [_small("1/lambda", 1.0 / lam, theta), _small("x/N^(1/6)", x / N ** (1 / 6), theta)]
    elif assertion == "A4":
        corr = x**3 / rootN + log(N) + x * N**1.5 / sqrt(n)
        conds = [
            _small("N/sqrt(n)", N / sqrt(n), theta),
            _small("x/sqrt(N)", x / rootN, theta),
            _large("x*sqrt(n)/N^(3/2)", x * sqrt(n) / N**1.5, theta),
        ]
    elif assertion == "A5":
        corr = x**3 / rootN + log(N) + N**1.5 / sqrt(n)
        conds = [_small("1/lambda", 1.0 / lam, theta), _small("x/sqrt(N)", x / rootN, theta)]
    else:
        corr = log(x * sqrt(2 * pi))
        conds = []
    approx = TailApprox(leading, leading, multiplier * corr, assertion)
    return approx, DomainReport(assertion, tuple(conds))


def kl_binomial(x: float, p: float) -> float:
    """``x log(x/p) + (1-x) log((1-x)/(1-p))`` for x, p in (0, 1)."""
    if not (0 < x < 1 and 0 < p < 1):
        raise ValueError(f"x and p must lie strictly inside (0, 1), got x={x}, p={p}")
    return max(0.0, float(xlogy(x, x / p) + xlogy(1 - x, (1 - x) / (1 - p))))


def binomial_point_lower_bound(k: int, n: int, p: float) -> float:
    """Lower bound on ``P{Bin(n, p) = k}``, 0 < k < n.

    ``0.8 (2π k (1 - k/n))^{-1/2} exp(-n g(k/n, p))`` with ``g`` the binomial KL.
    """
    if not 0 < k < n:
        raise ValueError(f"need 0 < k < n, got k={k}, n={n}")
    x = k / n
    return 0.8 / sqrt(2 * pi * k * (1 - x)) * exp(-n * kl_binomial(x, p))


# ---------------------------------------------------------------------------
# Slope predictions


class Regime(enum.Enum):
    EXACT_QUARTER = "EXACT_QUARTER"
    RHO_WEIGHTED = "RHO_WEIGHTED"
    DEGENERATE_o1 = "DEGENERATE_o1"
    NEYMAN_PEARSON = "NEYMAN_PEARSON"


@dataclass(frozen=True)
class SlopePrediction:
    test: str
    family: str
    value: float | None
    normalized: float | None
    regime: Regime


def lr_regime_margin(n: int, N: int, delta: float, h: HFunction) -> float:
    """``x_n / √N`` with ``x_n = sqrt(nλ/2) δ² ρ``; small iff δ = o(λ^{-1/2})."""
    lam = n / N
    return sqrt(n * lam / 2) * delta**2 * rho(h, lam) / sqrt(N)


def predict_alpha_slope(test: str | HFunction, family: FamilyTag, n: int, N: int, delta: float,
                        slack: float = 4.0, theta: float = DEFAULT_THETA,
                        enforce_strip: bool = False) -> SlopePrediction:
    """Theoretical α-slope of a test at (n, N, δ).

    ``test`` is ``"chi2"``, ``"lr"``, ``"np"`` (Neyman–Pearson) or a kernel.
    For J_GAMMA the strip condition is reported by
    :func:`~sparsegof.alternatives.strip_condition`; it is only enforced here
    when ``enforce_strip`` is set, since "≪" has no sharp finite-n meaning.
    Raises :class:`UnsupportedPredictionError` when no result applies.
    """
    lam = n / N
    scale = n * lam * delta**4
    name = test if isinstance(test, str) else test.name
    tag = str(family)
    if name == "np":
        value = n * delta**2 / 2
        return SlopePrediction("np", tag, value, value / scale, Regime.NEYMAN_PEARSON)
    if not family.intermediate:
        raise UnsupportedPredictionError(f"no intermediate slope for family {tag}")
    if name == "chi2":
        if family.kind is Family.J_BAR_1_8:
            return SlopePrediction("chi2", tag, None, None, Regime.DEGENERATE_o1)
        if family.kind is Family.J_GAMMA and enforce_strip:
            report = strip_condition(family.gamma, n, N, slack)
            if not report.satisfied:
                raise UnsupportedPredictionError(
                    f"(n={n}, N={N}) outside the strip for gamma={family.gamma:.4g} at slack {slack}: "
                    f"margins {report.lower_margin:.3g}, {report.upper_margin:.3g}")
        return SlopePrediction("chi2", tag, scale / 4, 0.25, Regime.EXACT_QUARTER)
    h = resolve_kernel(test)
    margin = lr_regime_margin(n, N, delta, h)
    if margin >= theta:
        raise UnsupportedPredictionError(
            f"{h.name}: x_n/sqrt(N) = {margin:.3g} >= {theta}; needs delta = o(lambda^(-1/2))")
    if h.name != "lr" and family.kind is not Family.J_O:
        raise UnsupportedPredictionError(f"generic h-test slopes are available for J_O only, got {tag}")
    r = rho(h, lam)
    return SlopePrediction(h.name, tag, scale * r * r / 4, r * r / 4, Regime.RHO_WEIGHTED)


# ---------------------------------------------------------------------------
# Relative efficiencies


class EfficiencyMarker(enum.Enum):
    ZERO = "ZERO"
    UNBOUNDED = "UNBOUNDED"


def predict_efficiency(kind: str, pair: tuple[str, str | HFunction], family: FamilyTag, lam: float,
                       lr_regime: bool = True, strip_ok: bool = True) -> float | EfficiencyMarker:
    """αARE or AIE of the χ² test relative to a second test.

    ``lam = math.inf`` stands for λ → ∞; a finite value means λ_n → λ.
    ``lr_regime`` says whether δ = o(λ^{-1/2}) holds, ``strip_ok`` whether
    the strip condition holds (J_GAMMA only).
    """
    if kind not in ("ARE_ALPHA", "AIE"):
        raise ValueError(f"unknown efficiency kind {kind!r}")
    first, second = pair
    if first != "chi2":
        raise UnsupportedPredictionError("efficiencies are stated for chi2 against a second test")
    h = resolve_kernel(second)
    tag = str(family)
    fixed_lambda = not isinf(lam)
    if family.kind is Family.J_O:
        if h.name != "lr" and (kind == "ARE_ALPHA" or not fixed_lambda):
            raise UnsupportedPredictionError("chi2 vs a generic h-test is covered for AIE with fixed lambda only")
        if not fixed_lambda:
            return 1.0
        r = rho(h, lam)
        return 1.0 / (r * r)
    if family.kind in (Family.J_GAMMA, Family.J_BAR_1_8):
        if fixed_lambda:
            raise OpenProblemError(f"{tag} with lambda fixed at {lam:g} has delta >= n^(-1/6): unresolved comparison")
        if h.name != "lr":
            raise UnsupportedPredictionError(f"only chi2 vs lr is covered in {tag}")
        if family.kind is Family.J_GAMMA:
            if not strip_ok:
                raise UnsupportedPredictionError(f"{tag} needs (n, N) inside the strip")
            return 1.0
        if not lr_regime:
            raise UnsupportedPredictionError(f"{tag} result needs delta = o(lambda^(-1/2))")
        return EfficiencyMarker.ZERO
    raise UnsupportedPredictionError(f"no efficiency result for family {tag}")
