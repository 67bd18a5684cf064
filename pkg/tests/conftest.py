import math

import numpy as np
import pytest

import garch_intensity as gi


@pytest.fixture(scope="session")
def table1():
    """The bundled GJR parameter set used by the smile experiment."""
    return gi.ModelParams(
        delta=2.0e-3, dt=1.0,
        omega_plus=8.50e-2, alpha_plus=9.79e2, beta_plus=9.39e-1, gamma_plus=1.09e4,
        omega_minus=7.28e-2, alpha_minus=8.49e2, beta_minus=9.42e-1, gamma_minus=1.07e4,
        recursion_kind=gi.RecursionKind.GJR)


@pytest.fixture(scope="session")
def constant_params():
    """Degenerate recursion: both intensities pinned at their omegas."""
    def make(omega_plus=1.0, omega_minus=1.0, delta=0.1, dt=1.0):
        return gi.ModelParams(delta=delta, dt=dt,
                              omega_plus=omega_plus, alpha_plus=0.0, beta_plus=0.0,
                              omega_minus=omega_minus, alpha_minus=0.0, beta_minus=0.0)
    return make


def poisson_pmf(k, lam):
    if k < 0:
        return 0.0
    return math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1.0))


def skellam_brute(m, lam_plus, lam_minus):
    """Brute-force Poisson-difference convolution, truncated at mean + 12 sd."""
    hi = int(max(lam_plus, lam_minus) + 12.0 * math.sqrt(max(lam_plus, lam_minus)) + 30)
    return sum(poisson_pmf(j, lam_plus) * poisson_pmf(j - m, lam_minus)
               for j in range(max(0, m), hi + 1))


@pytest.fixture(scope="session")
def skellam_oracle():
    return skellam_brute


def chi2_pvalue(observed_counts, expected_probs, n):
    """Pearson chi-square p-value with cells pooled below expectation 5."""
    from scipy import stats

    obs, exp = [], []
    acc_o = acc_e = 0.0
    for o, p in zip(observed_counts, expected_probs):
        acc_o += o
        acc_e += p * n
        if acc_e >= 5.0:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        obs[-1] += acc_o
        exp[-1] += acc_e
    obs = np.asarray(obs)
    exp = np.asarray(exp)
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = len(obs) - 1
    return float(stats.chi2.sf(stat, dof))


@pytest.fixture(scope="session")
def chi2_gof():
    return chi2_pvalue
