"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from adesens import DgpCoefficients, DgpSpec, EifDecomposition, NuisanceFit
from adesens.dgp import latent_index


def make_eif(a_hat, b_hat, se_a, se_b, n=400, outcome_type="continuous", t=50.0):
    """Synthetic influence arrays with exact means, SEs, and zero covariance.

    Uses orthogonal +/-1 patterns so the sample moments (ddof=1) match the
    requested values to machine precision.
    """
    assert n % 4 == 0
    pat_a = np.tile([1.0, -1.0], n // 2)
    pat_b = np.tile([1.0, 1.0, -1.0, -1.0], n // 4)
    base = a_hat + se_a * np.sqrt(n - 1.0) * pat_a
    corr = b_hat + se_b * np.sqrt(n - 1.0) * pat_b
    return EifDecomposition(base, corr, outcome_type, t)


def oracle_nuisances(spec: DgpSpec, coeffs: DgpCoefficients) -> NuisanceFit:
    """Closed-form nuisance predictors for the unconfounded continuous DGP.

    Valid when zeta = 0 and delta = 0: the observed score equals the latent
    one, the conditional mean is the linear index, and its median coincides
    with the mean (symmetric noise).
    """
    assert spec.zeta == 0.0 and spec.delta == 0.0 and spec.outcome_type == "continuous"

    def mu(a, x):
        return latent_index(spec, coeffs, a, x, np.zeros(np.asarray(a).shape[0]))

    def mu_prime(a, x):
        return spec.eta + np.asarray(x) @ coeffs.eta_ax_arr

    def score(a, x):
        return -(np.asarray(a, dtype=float) - np.asarray(x) @ coeffs.theta_arr)

    return NuisanceFit(mu=mu, mu_prime=mu_prime, score=score, median=mu,
                       outcome_type="continuous")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
