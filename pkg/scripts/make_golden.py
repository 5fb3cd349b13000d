#!/usr/bin/env python3
"""Regenerate tests/golden/oracle_values.txt from independent oracles.

Nothing here imports the package: Poisson moments are summed with mpmath at
40 significant digits, multinomial quantities are enumerated with
``itertools`` and exact rationals, and normal tails come from ``mpmath.erfc``.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb, factorial
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40
OUT = Path(__file__).resolve().parent.parent / "tests" / "golden" / "oracle_values.txt"


def poisson_moments(h, lam):
    lam = mp.mpf(lam)
    K = int(lam + 40 * mp.sqrt(lam) + 200)
    w = [mp.e ** (-lam) * lam**k / mp.factorial(k) for k in range(K + 1)]
    E = lambda f: mp.fsum(wk * f(k) for k, wk in enumerate(w))  # noqa: E731
    Eh = E(h)
    gam = E(lambda k: (h(k) - Eh) * (k - lam)) / lam
    g = lambda k: h(k) - Eh - gam * (k - lam)  # noqa: E731
    s2 = E(lambda k: g(k) ** 2)
    wv = lambda k: (k - lam) ** 2 - (k - lam) - lam  # noqa: E731
    rho = E(lambda k: g(k) * wv(k)) / mp.sqrt(s2 * E(lambda k: wv(k) ** 2))
    return Eh, s2, rho


def chi2_h(lam):
    lam = mp.mpf(lam)
    return lambda k: (k - lam) ** 2 / lam


def lr_h(lam):
    lam = mp.mpf(lam)
    return lambda k: 2 * k * mp.log(k / lam) if k > 0 else mp.mpf(0)


def compositions(n, N):
    for c in itertools.product(range(n + 1), repeat=N):
        if sum(c) == n:
            yield c


def multinomial_prob(c, N):
    n = sum(c)
    coef = factorial(n)
    for x in c:
        coef //= factorial(x)
    return Fraction(coef, N**n)


def stat_value(stat, c, n, N):
    lam = mp.mpf(n) / N
    if stat == "chi2":
        return mp.fsum((x - lam) ** 2 / lam for x in c)
    return mp.fsum(2 * x * mp.log(x / lam) for x in c if x > 0)


def null_moments(stat, n, N):
    m1 = m2 = mp.mpf(0)
    for c in compositions(n, N):
        p = mp.mpf(multinomial_prob(c, N).numerator) / multinomial_prob(c, N).denominator
        s = stat_value(stat, c, n, N)
        m1 += p * s
        m2 += p * s * s
    return m1, m2 - m1 * m1


def exact_tail(stat, n, N, t):
    total = Fraction(0)
    for c in compositions(n, N):
        if stat_value(stat, c, n, N) >= t - mp.mpf(10) ** -20:
            total += multinomial_prob(c, N)
    return total


def main() -> None:
    lines = ["# Oracle values for the test suite; regenerate with scripts/make_golden.py.",
             "# Format: key = value (40-digit mpmath or exact rational oracles)."]

    def put(key, value):
        lines.append(f"{key} = {mp.nstr(value, 17) if not isinstance(value, (str, Fraction)) else value}")

    for lam in (0.5, 1, 2, 5, 10, 100):
        Eh, s2, rho = poisson_moments(chi2_h(lam), lam)
        put(f"chi2.rho.{lam}", rho)
        put(f"chi2.sigma2.{lam}", s2)
    for lam in (1, 2, 5, 25, 50, 64, 100, 200):
        Eh, s2, rho = poisson_moments(lr_h(lam), lam)
        put(f"lr.rho.{lam}", rho)
        put(f"lr.Eh.{lam}", Eh)
        put(f"lr.sigma2.{lam}", s2)
    for stat in ("chi2", "lr"):
        for n, N in ((4, 2), (8, 4), (10, 3), (12, 5)):
            m, v = null_moments(stat, n, N)
            put(f"{stat}.null_mean.{n}.{N}", m)
            put(f"{stat}.null_var.{n}.{N}", v)
    for stat, n, N, t in (("chi2", 4, 2, 4), ("chi2", 8, 4, 6), ("chi2", 10, 3, 4.4), ("lr", 8, 4, 8),
                          ("lr", 10, 4, 10)):
        put(f"{stat}.tail.{n}.{N}.{t}", exact_tail(stat, n, N, mp.mpf(t)))
    put("normal.logsf.5", mp.log(mp.erfc(5 / mp.sqrt(2)) / 2))
    put("kl.0.01.0.5", mp.mpf("0.01") * mp.log(mp.mpf("0.02")) + mp.mpf("0.99") * mp.log(mp.mpf("1.98")))
    put("binom.pmf.10.5.0.5", mp.mpf(comb(10, 5)) / 2**10)
    put("binom.pmf.20.2.0.1", comb(20, 2) * mp.mpf("0.1") ** 2 * mp.mpf("0.9") ** 18)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
