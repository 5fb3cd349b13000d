import numpy as np
import pytest

from sparsegof.montecarlo import exact_tail
from sparsegof.splitting import (
    DEFAULT_RUNS,
    MIN_PARTICLES,
    lognormal_ci,
    particles_for_budget,
    splitting_tail,
)
from sparsegof.statistics import CHI2


def chi2_score(lam):
    return lambda x: CHI2(x, lam).sum(axis=-1)


def test_particles_for_budget():
    assert particles_for_budget(10**5, 20, 5) == 98
    assert particles_for_budget(10, 20, 5) == MIN_PARTICLES


def test_lognormal_ci():
    mean, lo, hi = lognormal_ci(np.array([1e-4, 2e-4, 1.5e-4, 1.2e-4]))
    assert mean == pytest.approx(1.425e-4)
    assert lo < mean < hi
    assert lognormal_ci(np.zeros(5)) == (0.0, 0.0, 0.0)
    assert lognormal_ci(np.array([0.3])) == (0.3, 0.3, 0.3)


def test_calibration_against_exact():
    # standardised chi2 at a moderate threshold, n=10, N=4
    n, N = 10, 4
    p = np.full(N, 0.25)
    thr = 20.0
    exact = exact_tail(n, N, p, "chi2", thr).p_hat
    res = splitting_tail(n, p, chi2_score(n / N), thr - 1e-9, budget=10**5, seed=1)
    assert res.converged and not res.upper_bound
    assert abs(res.p_hat / exact - 1) < 0.2
    assert res.ci_low <= res.p_hat <= res.ci_high
    assert len(res.run_estimates) == DEFAULT_RUNS


def test_unbiased_on_average_over_seeds():
    n, N = 40, 5
    p = np.full(N, 0.2)
    thr = 22.0
    exact = exact_tail(n, N, p, "chi2", thr).p_hat
    ests = [splitting_tail(n, p, chi2_score(n / N), thr - 1e-9, budget=20_000, seed=s).p_hat for s in range(8)]
    assert np.mean(ests) == pytest.approx(exact, rel=0.1)


def test_unreachable_threshold_reports_upper_bound():
    n, N = 6, 3
    p = np.full(N, 1 / 3)
    # the largest attainable chi2 is 2n = 12
    res = splitting_tail(n, p, chi2_score(n / N), 13.0, budget=5000, seed=0)
    assert res.p_hat == 0.0 and res.upper_bound
    assert res.ci_low == 0.0


def test_deterministic_and_key_sensitive():
    p = np.full(8, 1 / 8)
    a = splitting_tail(400, p, chi2_score(50), 25.0, budget=5000, seed=3, keys=(1,))
    b = splitting_tail(400, p, chi2_score(50), 25.0, budget=5000, seed=3, keys=(1,))
    c = splitting_tail(400, p, chi2_score(50), 25.0, budget=5000, seed=3, keys=(2,))
    assert a == b
    assert a.run_estimates != c.run_estimates


def test_needs_two_runs():
    with pytest.raises(ValueError):
        splitting_tail(10, [0.5, 0.5], chi2_score(5), 1.0, budget=100, seed=0, n_runs=1)
