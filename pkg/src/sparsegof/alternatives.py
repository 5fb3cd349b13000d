"""Alternative densities ``f(x) = 1 + δ(n) l(x)`` on [0, 1] and their families.

Two flavours of alternative are supported:

* a *direction* ``l`` with ``∫l = 0`` and ``∫l² = 1`` (the default is
  ``√2 cos(2πkx)``), scaled by a schedule δ(n);
* a *cell contrast* ``d`` with ``Σ d = 0``, giving ``p_m = (1 + δ d_m)/N``
  directly (the multinomial variant).

The schedule is a power law ``δ = (nλ²)^{-γ}``, the Pitman rate
``δ = (nλ)^{-1/4}``, or explicit values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import pi, sqrt
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.integrate import cumulative_simpson, quad
from scipy.interpolate import PchipInterpolator

from ._seeding import make_rng
from .errors import UnclassifiedFamilyError

CDF_GRID_POINTS = 2**16
TREND_FACTOR = 1.05
GAMMA_TOL = 1e-9  # lets configs write 1/6 as a rounded decimal


@dataclass(frozen=True, eq=False)
class DirectionFunction:
    """Bounded direction ``l`` on [0, 1] with ``∫l = 0`` and ``∫l² = 1``.

    ``antiderivative`` (``x -> ∫_0^x l``), when given, makes cell
    probabilities and CDF tabulation exact instead of quadrature-based.
    """

    l: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    sup_bound: float
    antiderivative: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    name: str = "custom"

    def __post_init__(self) -> None:
        mean, _ = quad(lambda x: float(self.l(np.asarray(x))), 0.0, 1.0, epsabs=1e-13, limit=200)
        sq, _ = quad(lambda x: float(self.l(np.asarray(x))) ** 2, 0.0, 1.0, epsabs=1e-12, limit=200)
        if abs(mean) > 1e-10:
            raise ValueError(f"direction must integrate to 0, got {mean:.3e}")
        if abs(sq - 1.0) > 1e-8:
            raise ValueError(f"direction must have unit L2 norm, got ||l||^2 = {sq:.10f}")

    def __call__(self, x) -> np.ndarray:
        return self.l(np.asarray(x, dtype=float))


def cosine_direction(k: int = 1) -> DirectionFunction:
    """``l(x) = √2 cos(2πkx)``, sup-norm √2."""
    if k < 1:
        raise ValueError("frequency k must be a positive integer")
    c = sqrt(2.0)
    return DirectionFunction(
        lambda x: c * np.cos(2 * pi * k * x),
        sup_bound=c,
        antiderivative=lambda x: c * np.sin(2 * pi * k * np.asarray(x, dtype=float)) / (2 * pi * k),
        name=f"cos{k}",
    )


@dataclass(frozen=True)
class DeltaSchedule:
    """How δ depends on (n, N).

    kind ``"power"``: ``(nλ²)^{-gamma}``; ``"pitman"``: ``(nλ)^{-1/4}``;
    ``"explicit"``: ``values`` is a constant or a mapping ``n -> δ``.
    """

    kind: str
    gamma: float | None = None
    values: float | Mapping[int, float] | None = None

    def __post_init__(self) -> None:
        if self.kind == "power":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("power-law schedule needs gamma > 0")
        elif self.kind == "explicit":
            if self.values is None:
                raise ValueError("explicit schedule needs values")
        elif self.kind != "pitman":
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def power(cls, gamma: float) -> "DeltaSchedule":
        return cls("power", gamma=gamma)

    @classmethod
    def pitman(cls) -> "DeltaSchedule":
        return cls("pitman")

    @classmethod
    def constant(cls, delta: float) -> "DeltaSchedule":
        return cls("explicit", values=float(delta))


def delta_value(schedule: DeltaSchedule, n: int, N: int) -> float:
    if n < 1 or N < 1:
        raise ValueError(f"need n, N >= 1, got n={n}, N={N}")
    lam = n / N
    if schedule.kind == "power":
        return (n * lam * lam) ** (-schedule.gamma)
    if schedule.kind == "pitman":
        return (n * lam) ** -0.25
    v = schedule.values
    if isinstance(v, Mapping):
        try:
            d = float(v[n])
        except KeyError:
            raise ValueError(f"explicit schedule has no delta for n={n}") from None
    else:
        d = float(v)
    if d < 0:
        raise ValueError(f"delta must be non-negative, got {d}")
    return d


@dataclass(frozen=True, eq=False)
class AlternativeSpec:
    schedule: DeltaSchedule
    direction: DirectionFunction | None = None
    cell_contrast: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if (self.direction is None) == (self.cell_contrast is None):
            raise ValueError("give exactly one of direction or cell_contrast")
        if self.cell_contrast is not None:
            d = np.asarray(self.cell_contrast, dtype=float)
            if d.ndim != 1 or abs(d.sum()) > 1e-9 * max(1.0, np.abs(d).sum()):
                raise ValueError("cell contrast must be a vector summing to 0")
            object.__setattr__(self, "cell_contrast", d)

    @property
    def sup_bound(self) -> float:
        if self.direction is not None:
            return self.direction.sup_bound
        return float(np.max(np.abs(self.cell_contrast)))

    def delta(self, n: int, N: int) -> float:
        d = delta_value(self.schedule, n, N)
        if self.direction is not None and d * self.sup_bound > 1.0 + 1e-12:
            raise ValueError(f"delta={d:.6g} too large: density 1 + delta*l would go negative")
        return d


def _resolve_delta(spec: AlternativeSpec, n: int, N: int | None) -> float:
    if N is None:
        if spec.schedule.kind != "explicit":
            raise ValueError(f"schedule {spec.schedule.kind!r} needs the cell count N")
        N = 1
    return spec.delta(n, N)


def eval_density(spec: AlternativeSpec, n: int, x, N: int | None = None):
    """``1 + δ l(x)``; N is needed whenever δ depends on λ = n/N."""
    if spec.direction is None:
        raise ValueError("a cell-contrast alternative has no density on [0, 1]")
    delta = _resolve_delta(spec, n, N)
    f = 1.0 + delta * spec.direction(x)
    if np.any(f < 0):
        raise ValueError("negative density")
    return f


def _cell_integrals(direction: DirectionFunction, N: int) -> np.ndarray:
    edges = np.arange(N + 1) / N
    if direction.antiderivative is not None:
        return np.diff(direction.antiderivative(edges))
    return np.array([
        quad(lambda x: float(direction(x)), a, b, epsabs=1e-13)[0]
        for a, b in zip(edges[:-1], edges[1:])
    ])


def cell_probabilities(spec: AlternativeSpec, n: int, N: int) -> np.ndarray:
    """Probabilities of the N equal cells under the alternative at sample size n."""
    if N < 1:
        raise ValueError("N must be positive")
    delta = spec.delta(n, N)
    if spec.cell_contrast is not None:
        d = spec.cell_contrast
        if d.size != N:
            raise ValueError(f"contrast has {d.size} cells, requested N={N}")
        p = (1.0 + delta * d) / N
    elif delta == 0.0:
        p = np.full(N, 1.0 / N)
    else:
        p = 1.0 / N + delta * _cell_integrals(spec.direction, N)
    if np.any(p <= 0):
        raise ValueError("alternative puts non-positive probability on a cell")
    if abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"cell probabilities sum to {p.sum():.15f}")
    return p


def contrast_d2(spec: AlternativeSpec, N: int) -> float:
    """Finite-N contrast ``N^{-1} Σ l_{mN}²`` with ``l_{mN}`` the cell average of l."""
    if spec.cell_contrast is not None:
        return float(np.mean(spec.cell_contrast**2))
    l_m = N * _cell_integrals(spec.direction, N)
    return float(np.mean(l_m**2))


def epsilon_contrast(p) -> float:
    """``N^{-1} Σ (N p_m - 1)²``."""
    p = np.asarray(p, dtype=float)
    N = p.size
    return float(np.mean((N * p - 1.0) ** 2))


def _alt_cdf_table(spec: AlternativeSpec, delta: float) -> tuple[np.ndarray, np.ndarray]:
    x = np.linspace(0.0, 1.0, CDF_GRID_POINTS + 1)
    L = spec.direction.antiderivative
    if L is not None:
        F = x + delta * (L(x) - L(0.0))
    else:
        F = x + delta * cumulative_simpson(spec.direction(x), x=x, initial=0.0)
    return x, F


def sample_alternative(spec: AlternativeSpec, n: int, seed: int, N: int | None = None) -> np.ndarray:
    """n iid draws on [0, 1] from the alternative, reproducible per seed.

    The CDF is tabulated on a 2^16-interval grid and inverted with monotone
    cubic interpolation.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = make_rng(seed)
    if n == 0:
        return np.empty(0)
    if spec.cell_contrast is not None:
        Ncells = spec.cell_contrast.size
        p = cell_probabilities(spec, n, Ncells)
        cells = rng.choice(Ncells, size=n, p=p)
        return (cells + rng.random(n)) / Ncells
    delta = _resolve_delta(spec, n, N)
    u = rng.random(n)
    if delta == 0.0:
        return u
    x, F = _alt_cdf_table(spec, delta)
    if not np.all(np.diff(F) > 0):
        raise ValueError("tabulated CDF is not strictly increasing; cannot invert")
    F[-1] = 1.0
    inverse = PchipInterpolator(F, x)
    return np.clip(inverse(u), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Family classification


class Family(enum.Enum):
    UNDETECTABLE = "UNDETECTABLE"
    PITMAN = "PITMAN"
    J_O = "J_O"
    J_GAMMA = "J_GAMMA"
    J_BAR_1_8 = "J_BAR_1_8"
    FIXED = "FIXED"


@dataclass(frozen=True)
class FamilyTag:
    kind: Family
    gamma: float | None = None

    def __str__(self) -> str:
        if self.kind is Family.J_GAMMA:
            return f"J_GAMMA({self.gamma:.6g})"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "FamilyTag":
        text = text.strip()
        if text.startswith("J_GAMMA"):
            inner = text[len("J_GAMMA"):].strip("() ")
            return cls(Family.J_GAMMA, float(inner))
        return cls(Family(text))

    @property
    def intermediate(self) -> bool:
        return self.kind in (Family.J_O, Family.J_GAMMA, Family.J_BAR_1_8)


def _trend(values: np.ndarray, factor: float = TREND_FACTOR) -> str:
    """'decay', 'growth', 'flat' or 'ambiguous' for a positive sequence."""
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        return "decay" if np.all(np.diff(v) <= 0) and v[-1] == 0 else "ambiguous"
    total = v[-1] / v[0]
    steps = v[1:] / v[:-1]
    if abs(np.log(total)) < np.log(factor) and np.all(np.abs(np.log(steps)) < np.log(factor)):
        return "flat"
    if np.all(steps < 1) and total <= 1 / factor:
        return "decay"
    if np.all(steps > 1) and total >= factor:
        return "growth"
    return "ambiguous"


def classify_family(schedule: DeltaSchedule, n_grid: Iterable[int], N_of_n: Callable[[int], int] | Mapping[int, int]) -> FamilyTag:
    """Assign the family of alternatives by rate comparisons along a grid.

    Order of checks: FIXED (δ flat), UNDETECTABLE (``δ (nλ)^{1/4}`` decays),
    PITMAN (that product flat), then, for intermediate alternatives,
    J_BAR_1_8 (``δ >= (nλ²)^{-1/8}`` on the upper half of the grid),
    J_GAMMA (power law with 1/8 < γ <= 1/6) and J_O
    (``δ (n max(1, λ²))^{1/6}`` decays).  Anything else raises.
    """
    ns = np.array(sorted(set(int(n) for n in n_grid)))
    if ns.size < 3:
        raise ValueError("classification needs at least 3 grid points")
    lookup = N_of_n.__getitem__ if isinstance(N_of_n, Mapping) else N_of_n
    Ns = np.array([int(lookup(int(n))) for n in ns], dtype=float)
    lam = ns / Ns
    delta = np.array([delta_value(schedule, int(n), int(N)) for n, N in zip(ns, Ns)])

    if schedule.kind == "explicit" and _trend(delta) == "flat":
        return FamilyTag(Family.FIXED)
    pitman = _trend(delta * (ns * lam) ** 0.25)
    if pitman == "decay":
        return FamilyTag(Family.UNDETECTABLE)
    if pitman == "flat":
        return FamilyTag(Family.PITMAN)
    if pitman != "growth":
        raise UnclassifiedFamilyError(f"ambiguous trend of delta*(n*lambda)^(1/4): {delta * (ns * lam) ** 0.25}")

    if schedule.kind == "power":
        g = schedule.gamma
        if g <= 1 / 8:
            return FamilyTag(Family.J_BAR_1_8)
        if g <= 1 / 6 + GAMMA_TOL:
            return FamilyTag(Family.J_GAMMA, g)
    upper = slice(ns.size // 2, None)
    if np.all(delta[upper] >= (ns[upper] * lam[upper] ** 2) ** -0.125):
        return FamilyTag(Family.J_BAR_1_8)
    if _trend(delta * (ns * np.maximum(1.0, lam**2)) ** (1 / 6)) == "decay":
        return FamilyTag(Family.J_O)
    raise UnclassifiedFamilyError("schedule matches none of J_O, J_GAMMA, J_BAR_1_8 along the grid")


# ---------------------------------------------------------------------------
# Strip condition for the quarter law at 1/8 < γ <= 1/6


@dataclass(frozen=True)
class StripReport:
    gamma: float
    n: int
    N: int
    lower_exponent: float
    upper_exponent: float
    lower_bound: float
    upper_bound: float
    lower_margin: float
    upper_margin: float
    inside: bool
    satisfied: bool
    slack: float


def strip_exponents(gamma: float) -> tuple[float, float]:
    if not (1 / 8 < gamma <= 1 / 6 + GAMMA_TOL):
        raise ValueError(f"strip defined for gamma in (1/8, 1/6], got {gamma}")
    lower = (1 - 6 * gamma) / (1 - 4 * gamma)
    upper = 3 * (1 - 4 * gamma) / (4 * (1 - 2 * gamma))
    if abs(lower) < 1e-12:
        lower = 0.0
    return lower, upper


def strip_condition(gamma: float, n: int, N: int, slack: float = 4.0) -> StripReport:
    """Check ``n^a << N << n^b`` with a multiplicative slack on both sides.

    ``inside`` is the raw ``n^a < N < n^b``; ``satisfied`` additionally needs
    both margins ``N / n^a`` and ``n^b / N`` to be at least ``slack``.
    """
    a, b = strip_exponents(gamma)
    lo, hi = n**a, n**b
    lm, um = N / lo, hi / N
    return StripReport(gamma, n, N, a, b, lo, hi, lm, um, lo < N < hi, lm >= slack and um >= slack, slack)
