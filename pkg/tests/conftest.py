"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(271828)


def rand_spd(rng, n, jitter=1.0):
    a = rng.standard_normal((n, n))
    return a @ a.T + jitter * n * np.eye(n)


def rand_sym(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def fd_jac(f, x0, h=None):
    """Central-difference Jacobian, written here so the oracle stays
    independent of the library's own finite-difference helper."""
    x0 = np.asarray(x0, dtype=float).ravel()
    if h is None:
        h = 1e-5 * max(1.0, np.abs(x0).max())
    cols = []
    for k in range(x0.size):
        xp, xm = x0.copy(), x0.copy()
        xp[k] += h
        xm[k] -= h
        cols.append((np.asarray(f(xp), float) - np.asarray(f(xm), float)) / (2 * h))
    return np.column_stack(cols)


def theta_from(mu, sigma):
    """Augmented population moment from a mean vector and covariance."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return np.block([[np.ones((1, 1)), mu[None, :]],
                     [mu[:, None], sigma + np.outer(mu, mu)]])


def rand_unit_corner_theta(rng, p, jitter=1.0):
    """Random PD augmented moment with unit corner and a healthy Sharpe.

    Means are kept away from zero so maps dividing by the squared Sharpe
    stay well conditioned for finite-difference checks.
    """
    mu = rng.uniform(0.25, 0.75, p) * rng.choice((-1.0, 1.0), p)
    sigma = rand_spd(rng, p, jitter) / p
    return theta_from(mu, sigma)
