import numpy as np
import pytest

from sparsegof.poisson_moments import (
    enumerated_null_moments,
    lyapunov_check,
    marginal_mean,
    marginal_null_moments,
    moment_summary,
    null_moments,
    poisson_expectation,
    rho,
    shift_xn,
)
from sparsegof.statistics import CHI2, EMPTY_CELLS, LR


def test_poisson_expectation_examples():
    assert poisson_expectation(lambda k: k, 3.7).value == pytest.approx(3.7, abs=1e-12)
    assert poisson_expectation(lambda k: k**2, 2.0).value == pytest.approx(6.0, abs=1e-12)
    r = poisson_expectation(lambda k: (k - 5.0) ** 4, 5.0, envelope=lambda k: (k + 5.0) ** 4)
    assert r.value == pytest.approx(80.0, abs=1e-10)
    assert r.tail_bound < 1e-12 and r.upper_index >= r.lower_index


def test_poisson_expectation_rejects_bad_input():
    with pytest.raises(ValueError):
        poisson_expectation(lambda k: k, 0.0)
    with pytest.raises(ValueError):
        poisson_expectation(lambda k: k, 1.0, tol=0)
    with pytest.raises(ValueError):
        poisson_expectation(lambda k: np.exp(k), 5.0, envelope=lambda k: np.exp(k * k))


def test_halving_tol_changes_less_than_tail_bound():
    for lam in (0.5, 7.0, 300.0):
        a = poisson_expectation(lambda k: LR(k, lam) ** 2, lam, tol=1e-8, envelope=lambda k: (2 * (k + 1) * (np.log1p(k) + abs(np.log(lam)) + 1)) ** 2)
        b = poisson_expectation(lambda k: LR(k, lam) ** 2, lam, tol=5e-9, envelope=lambda k: (2 * (k + 1) * (np.log1p(k) + abs(np.log(lam)) + 1)) ** 2)
        assert abs(a.value - b.value) <= a.tail_bound + 1e-12 * abs(a.value)


@pytest.mark.parametrize("lam", [0.5, 1, 2, 5, 10, 100])
def test_chi2_summary(lam, golden):
    ms = moment_summary(CHI2, lam)
    assert ms.Eh == pytest.approx(1.0, abs=1e-10)
    assert ms.sigma2 == pytest.approx(golden[f"chi2.sigma2.{lam}"], abs=1e-9)
    assert abs(ms.rho - 1.0) < 1e-10


@pytest.mark.parametrize("lam", [1, 2, 5, 25, 50, 64, 100, 200])
def test_lr_summary_against_golden(lam, golden):
    ms = moment_summary(LR, lam)
    assert ms.rho == pytest.approx(golden[f"lr.rho.{lam}"], abs=1e-10)
    assert ms.Eh == pytest.approx(golden[f"lr.Eh.{lam}"], abs=1e-10)
    assert ms.sigma2 == pytest.approx(golden[f"lr.sigma2.{lam}"], rel=1e-9)


def test_lr_rho_asymptote_example():
    assert rho(LR, 50) == pytest.approx(1 - 1 / 300, abs=7e-4)


@pytest.mark.parametrize("h", [CHI2, LR, EMPTY_CELLS])
@pytest.mark.parametrize("lam", [0.3, 2.0, 17.0, 150.0])
def test_sigma2_identity(h, lam):
    ms = moment_summary(h, lam)
    assert ms.sigma2 == pytest.approx(ms.var_h * (1 - ms.corr_h_xi**2), rel=1e-9)
    assert -1.0 <= ms.rho <= 1.0


def test_linear_kernel_rejected():
    from sparsegof.statistics import HFunction

    lin = HFunction("affine", lambda u, lam: 3.0 * u - 1.0)
    with pytest.raises(ValueError, match="linear"):
        moment_summary(lin, 4.0)


def test_null_moments_examples(golden):
    approx = null_moments(CHI2, 8, 4, mode="poisson")
    exact = null_moments(CHI2, 8, 4)
    assert approx.mean == pytest.approx(4.0, abs=1e-10)
    assert exact.mean == pytest.approx(3.0, abs=1e-12) and exact.method == "enumerate"
    lr = null_moments(LR, 8, 4)
    assert lr.mean == pytest.approx(golden["lr.null_mean.8.4"], rel=1e-12)
    assert lr.var == pytest.approx(golden["lr.null_var.8.4"], rel=1e-10)
    assert null_moments(CHI2, 5, 1).degenerate


@pytest.mark.parametrize("stat", ["chi2", "lr"])
@pytest.mark.parametrize("n,N", [(4, 2), (8, 4), (10, 3), (12, 5)])
def test_exact_null_moments_match_golden(stat, n, N, golden):
    e = enumerated_null_moments(stat, n, N)
    m = marginal_null_moments(stat, n, N)
    for nm in (e, m):
        assert nm.mean == pytest.approx(golden[f"{stat}.null_mean.{n}.{N}"], rel=1e-11)
        assert nm.var == pytest.approx(golden[f"{stat}.null_var.{n}.{N}"], rel=1e-9)


def test_exact_vs_poisson_chi2_mean_gap_is_one():
    for n, N in ((1000, 10), (5000, 50), (20000, 200)):
        gap = null_moments(CHI2, n, N, mode="poisson").mean - null_moments(CHI2, n, N, mode="marginal").mean
        assert gap == pytest.approx(1.0, abs=1e-9)


def test_marginal_chi2_variance_closed_form():
    n, N = 1000, 10
    assert null_moments(CHI2, n, N, mode="marginal").var == pytest.approx(2 * (N - 1) * (n - 1) / n, rel=1e-10)


def test_marginal_mean_under_alternative_chi2_closed_form():
    n, N = 500, 5
    p = np.array([0.3, 0.25, 0.2, 0.15, 0.1])
    eps = N * np.sum((p - 1 / N) ** 2)
    assert marginal_mean(CHI2, n, p) == pytest.approx(N - 1 + (n - 1) * eps, rel=1e-12)


def test_shift_xn_examples():
    assert shift_xn(CHI2, 4096, 64, 1 / 16) == pytest.approx(np.sqrt(2), rel=1e-12)
    assert shift_xn(CHI2, 4096, 64, 0.0) == 0.0
    x_lr = shift_xn(LR, 4096, 64, 1 / 16)
    assert x_lr == pytest.approx(np.sqrt(2) * rho(LR, 64), rel=1e-12) and x_lr < np.sqrt(2)


def test_lyapunov_examples():
    ms = moment_summary(CHI2, 1.0)
    third = ms.L3N * ms.sigma2**1.5
    assert lyapunov_check(CHI2, 10**4, 10**4) == pytest.approx(third / (2**1.5 * 100), rel=1e-12)
    assert lyapunov_check(CHI2, 400, 100) / lyapunov_check(CHI2, 1600, 400) == pytest.approx(2.0, rel=1e-12)
    vals = [lyapunov_check(CHI2, int(lam) * 10, 10) for lam in (1e2, 1e3, 1e4)]
    assert max(vals) / min(vals) < 1.1
