"""Omega estimators and the delta-method chains they feed."""

import numpy as np
import pytest

from portinf import asymptotics as asy
from portinf import moments as mo
from portinf.errors import BandwidthTooLarge, NonPositiveRfr
from portinf.gaussian import gaussian_omega
from portinf.kernels import ivech, vech
from portinf.moments import AugmentedMoment

from conftest import fd_jac, rand_unit_corner_theta, theta_from


def scalar_gaussian_block(mu, sg):
    s2 = sg**2
    return np.array([[s2, 2 * mu * s2], [2 * mu * s2, 4 * mu**2 * s2 + 2 * s2**2]])


class TestOmegaVanilla:
    def test_constant_rows_give_zero(self):
        rows = np.tile([1.0, 0.3, -0.1], (6, 1))
        om = asy.omega_vanilla(rows)
        np.testing.assert_allclose(om.omega, np.zeros((6, 6)), atol=1e-30)

    def test_unconditional_first_row_col_exactly_zero(self, rng):
        rows = mo.augment(rng.standard_normal((40, 2)))
        om = asy.omega_vanilla(rows)
        np.testing.assert_array_equal(om.omega[0], np.zeros(6))
        np.testing.assert_array_equal(om.omega[:, 0], np.zeros(6))

    def test_scalar_gaussian_matches_closed_form(self):
        rng = np.random.default_rng(90125)
        x = 1.0 + rng.standard_normal((100_000, 1))
        om = asy.omega_vanilla(mo.augment(x))
        np.testing.assert_allclose(om.omega[1:, 1:], scalar_gaussian_block(1.0, 1.0),
                                   rtol=0.05)


class TestOmegaHac:
    def test_zero_bandwidth_equals_vanilla(self, rng):
        rows = mo.augment(rng.standard_normal((200, 2)))
        np.testing.assert_allclose(
            asy.omega_hac(rows, bandwidth=0).omega, asy.omega_vanilla(rows).omega)

    def test_iid_close_to_vanilla(self):
        rng = np.random.default_rng(777)
        rows = mo.augment(rng.standard_normal((10_000, 1)))
        hac = asy.omega_hac(rows, bandwidth=3).omega
        van = asy.omega_vanilla(rows).omega
        assert np.linalg.norm(hac - van) < 0.10 * np.linalg.norm(van)

    def test_ar1_long_run_variance(self):
        rng = np.random.default_rng(1234)
        t, phi = 10_000, 0.5
        e = rng.standard_normal(t)
        x = np.empty(t)
        x[0] = e[0] / np.sqrt(1 - phi**2)
        for i in range(1, t):
            x[i] = phi * x[i - 1] + e[i]
        rows = mo.augment(x[:, None])
        hac = asy.omega_hac(rows, kernel="bartlett", bandwidth=60).omega
        van = asy.omega_vanilla(rows).omega
        ratio = hac[1, 1] / van[1, 1]
        assert abs(ratio - 3.0) < 0.6  # (1+phi)/(1-phi) = 3

    def test_parzen_weights_run(self, rng):
        rows = mo.augment(rng.standard_normal((500, 2)))
        om = asy.omega_hac(rows, kernel="parzen", bandwidth=5)
        vals = np.linalg.eigvalsh(om.omega)
        assert vals[0] >= -1e-12

    def test_bandwidth_too_large(self, rng):
        rows = mo.augment(rng.standard_normal((50, 1)))
        with pytest.raises(BandwidthTooLarge):
            asy.omega_hac(rows, bandwidth=50)


class TestThetaInverseCovariance:
    def test_scalar_gaussian_grid_cell(self):
        tm = AugmentedMoment(np.array([[1.0, 1.0], [1.0, 2.0]]), n_obs=100)
        cov = asy.theta_inverse_covariance(tm, gaussian_omega(tm)).covariance
        expect = np.array([[6.0, -4.0, 2.0], [-4.0, 3.0, -2.0], [2.0, -2.0, 2.0]])
        np.testing.assert_allclose(cov, expect, atol=1e-10)

    def test_zero_mean_kills_corner_variance(self):
        tm = AugmentedMoment(np.array([[1.0, 0.0], [0.0, 1.0]]), n_obs=100)
        cov = asy.theta_inverse_covariance(tm, gaussian_omega(tm)).covariance
        assert cov[0, 0] == pytest.approx(0.0, abs=1e-12)


class TestPortfolioCovariance:
    def test_scalar_direct_delta_oracle(self):
        # map (mean, variance) -> weight, sandwiched with the Gaussian
        # covariance of the two sample moments
        tm = AugmentedMoment(np.array([[1.0, 1.0], [1.0, 2.0]]), n_obs=50)
        dist = asy.portfolio_covariance(tm, gaussian_omega(tm), risk_budget=1.0)

        def weight_of(v):
            mean, var = v
            return np.array([1.0 / np.sqrt(var)])

        grad = fd_jac(weight_of, np.array([1.0, 1.0]))
        cov_mu_s2 = np.diag([1.0, 2.0])  # Var(mean), Var(variance) at mu=sg=1
        expect = grad @ cov_mu_s2 @ grad.T
        np.testing.assert_allclose(dist.covariance, expect, atol=1e-8)

    def test_risk_budget_scaling(self, rng):
        theta = rand_unit_corner_theta(rng, 2)
        tm = AugmentedMoment(theta, n_obs=100)
        om = gaussian_omega(tm)
        d1 = asy.portfolio_covariance(tm, om, risk_budget=1.0)
        d2 = asy.portfolio_covariance(tm, om, risk_budget=2.0)
        np.testing.assert_allclose(d2.point, 2 * d1.point, rtol=1e-12)
        np.testing.assert_allclose(d2.covariance, 4 * d1.covariance, rtol=1e-12)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_jacobian_chain_matches_finite_differences(self, p, rng):
        theta = rand_unit_corner_theta(rng, p)
        tm = AugmentedMoment(theta, n_obs=100)
        risk_budget = 0.8
        weights, h, _ = asy._portfolio_jacobian_chain(tm, risk_budget)

        def weight_map(v):
            t = AugmentedMoment(ivech(v), n_obs=100)
            parts = mo.unpack_theta_inverse(t)
            return (risk_budget / np.sqrt(parts.snr_sq)) * parts.markowitz

        fd = fd_jac(weight_map, vech(theta))
        np.testing.assert_allclose(h, fd, atol=1e-6)


class TestPortfolioCovarianceMonteCarlo:
    def test_three_asset_empirical_agreement(self):
        mu = np.array([0.35, 0.15, 0.25])
        sigma = np.array([[1.0, 0.2, 0.1], [0.2, 0.7, 0.15], [0.1, 0.15, 0.9]])
        theta_pop = theta_from(mu, sigma)
        t, trials = 1500, 4000
        tm = AugmentedMoment(theta_pop, n_obs=t)
        theo = asy.portfolio_covariance(tm, gaussian_omega(tm), risk_budget=1.0).covariance
        rng = np.random.default_rng(1879)
        cf = np.linalg.cholesky(sigma)
        weights = []
        for _ in range(8):
            z = rng.standard_normal((trials // 8, t, 3))
            x = mu + z @ cf.T
            rows = np.concatenate([np.ones((trials // 8, t, 1)), x], axis=2)
            thetas = np.einsum("cti,ctj->cij", rows, rows) / t
            invs = np.linalg.inv(thetas)
            psi = np.sqrt(invs[:, 0, 0] - 1.0)
            weights.append(-invs[:, 1:, 0] / psi[:, None])
        emp = t * np.cov(np.vstack(weights), rowvar=False)
        rel = np.linalg.norm(emp - theo) / np.linalg.norm(theo)
        assert rel < 0.10


class TestSnrVariance:
    def test_scalar_oracle(self):
        tm = AugmentedMoment(np.array([[1.0, 1.0], [1.0, 2.0]]), n_obs=50)
        var = asy.snr_variance(tm, gaussian_omega(tm), risk_budget=1.0, rfr=0.1)
        # achieved ratio is snr - (rfr/R) sqrt(varhat)/sg; delta method on
        # the variance estimate alone gives rfr^2/(2 R^2)
        assert var == pytest.approx(0.1**2 / 2.0, abs=1e-12)

    def test_vanishes_as_rfr_shrinks(self):
        tm = AugmentedMoment(np.array([[1.0, 1.0], [1.0, 2.0]]), n_obs=50)
        om = gaussian_omega(tm)
        assert asy.snr_variance(tm, om, 1.0, 1e-8) < 1e-14

    def test_rfr_scaling_in_risk_budget(self, rng):
        theta = rand_unit_corner_theta(rng, 2)
        tm = AugmentedMoment(theta, n_obs=100)
        om = gaussian_omega(tm)
        v1 = asy.snr_variance(tm, om, risk_budget=1.0, rfr=0.2)
        v2 = asy.snr_variance(tm, om, risk_budget=2.0, rfr=0.2)
        assert v2 == pytest.approx(v1 / 4.0, rel=1e-10)

    def test_nonpositive_rfr_raises(self):
        tm = AugmentedMoment(np.array([[1.0, 1.0], [1.0, 2.0]]), n_obs=50)
        with pytest.raises(NonPositiveRfr):
            asy.snr_variance(tm, gaussian_omega(tm), 1.0, 0.0)

    @pytest.mark.parametrize("p", [1, 2])
    def test_gradient_matches_finite_differences(self, p, rng):
        theta = rand_unit_corner_theta(rng, p)
        tm = AugmentedMoment(theta, n_obs=100)
        om = gaussian_omega(tm)
        risk_budget, rfr = 1.3, 0.15
        mu_pop = theta[1:, 0]
        sig_pop = theta[1:, 1:] - np.outer(mu_pop, mu_pop)

        def snr_map(v):
            t = AugmentedMoment(ivech(v), n_obs=100)
            parts = mo.unpack_theta_inverse(t)
            w = (risk_budget / np.sqrt(parts.snr_sq)) * parts.markowitz
            return np.array([(w @ mu_pop - rfr) / np.sqrt(w @ sig_pop @ w)])

        fd = fd_jac(snr_map, vech(theta)).ravel()
        var_expect = float(fd @ om.omega @ fd)
        var_got = asy.snr_variance(tm, om, risk_budget, rfr)
        assert var_got == pytest.approx(var_expect, rel=1e-5)


class TestSnrSecondOrder:
    def test_one_asset_curvature_vanishes(self):
        tm = AugmentedMoment(np.array([[1.0, 0.7], [0.7, 1.49]]), n_obs=50)
        f, _ = asy.snr_second_order(tm, gaussian_omega(tm), risk_budget=1.0)
        np.testing.assert_allclose(f, np.zeros((1, 1)), atol=1e-12)

    def test_curvature_annihilates_the_optimum(self, rng):
        theta = rand_unit_corner_theta(rng, 3)
        tm = AugmentedMoment(theta, n_obs=100)
        om = gaussian_omega(tm)
        risk_budget = 0.9
        f, _ = asy.snr_second_order(tm, om, risk_budget)
        est = mo.sr_optimal_portfolio(tm, risk_budget)
        np.testing.assert_allclose(f @ est.weights, np.zeros(3), atol=1e-10)

    def test_monte_carlo_mean_of_quadratic_limit(self):
        # population law: n (SNR(w_hat) - snr) ~ 0.5 z' M'FM z
        mu = np.array([0.4, 0.2])
        sigma = np.array([[1.0, 0.25], [0.25, 0.5]])
        theta_pop = theta_from(mu, sigma)
        tm = AugmentedMoment(theta_pop, n_obs=2000)
        om = gaussian_omega(tm)
        f, m = asy.snr_second_order(tm, om, risk_budget=1.0)
        expect = 0.5 * np.trace(m.T @ f @ m)
        rng = np.random.default_rng(5150)
        t, trials = 2000, 5000
        cf = np.linalg.cholesky(sigma)
        vals = []
        snr = np.sqrt(mu @ np.linalg.solve(sigma, mu))
        for _ in range(10):
            z = rng.standard_normal((trials // 10, t, 2))
            x = mu + z @ cf.T
            rows = np.concatenate([np.ones((trials // 10, t, 1)), x], axis=2)
            thetas = np.einsum("cti,ctj->cij", rows, rows) / t
            invs = np.linalg.inv(thetas)
            port = -invs[:, 1:, 0]
            psi = np.sqrt(invs[:, 0, 0] - 1.0)
            w = port / psi[:, None]
            num = w @ mu
            den = np.sqrt(np.einsum("ci,ij,cj->c", w, sigma, w))
            vals.append(t * (num / den - snr))
        mean = float(np.concatenate([np.atleast_1d(v) for v in vals]).mean())
        assert abs(mean - expect) < 0.15 * abs(expect)


class TestWaldStatistics:
    def test_simple_ratio(self):
        dr = asy.DistributionResult([1.0], [[4.0]], n_obs=4)
        np.testing.assert_allclose(asy.wald_statistics(dr), [1.0])

    def test_zero_points(self):
        dr = asy.DistributionResult(np.zeros(3), np.eye(3), n_obs=9)
        np.testing.assert_array_equal(asy.wald_statistics(dr), np.zeros(3))

    def test_degenerate_variance_flagged_as_infinite(self):
        dr = asy.DistributionResult([1.0, -2.0, 0.0], np.diag([0.0, 1.0, 0.0]), n_obs=4)
        with pytest.warns(RuntimeWarning):
            z = asy.wald_statistics(dr)
        assert z[0] == np.inf
        assert z[1] == pytest.approx(-4.0)
        assert z[2] == 0.0

    def test_monte_carlo_size(self):
        # weights are truly zero under a zero-mean population: the Wald
        # test should reject at roughly its nominal level
        rng = np.random.default_rng(31337)
        t, p, trials = 1024, 5, 2000
        hits = 0
        total = 0
        for _ in range(trials):
            rows = mo.augment(rng.standard_normal((t, p)))
            tm = mo.sample_theta(rows)
            om = asy.omega_vanilla(rows)
            dist = asy.theta_inverse_covariance(tm, om)
            z = asy.wald_statistics(dist)[1 : p + 1]
            hits += int(np.sum(np.abs(z) > 1.96))
            total += p
        rate = hits / total
        assert 0.04 <= rate <= 0.06


class TestCovariancePsdInvariant:
    def test_returned_covariances_are_symmetric_psd(self, rng):
        theta = rand_unit_corner_theta(rng, 3)
        tm = AugmentedMoment(theta, n_obs=200)
        x = rng.standard_normal((200, 3)) * 0.1 + 0.02
        rows = mo.augment(x)
        tm_s = mo.sample_theta(rows)
        for om in (asy.omega_vanilla(rows), asy.omega_hac(rows, bandwidth=4),
                   gaussian_omega(tm)):
            use = tm if om.estimator == "gaussian" else tm_s
            for dist in (asy.theta_inverse_covariance(use, om),
                         asy.portfolio_covariance(use, om, risk_budget=1.0)):
                cov = dist.covariance
                np.testing.assert_allclose(cov, cov.T, atol=1e-12)
                assert np.linalg.eigvalsh(cov)[0] > -1e-10 * max(1.0, np.abs(cov).max())


class TestAttributeError:
    def test_block_diagonal_gives_zero(self):
        cov = np.diag([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        dr = asy.DistributionResult(np.zeros(6), cov, n_obs=10)
        np.testing.assert_allclose(asy.attribute_error(dr, 2), [0.0, 0.0])

    def test_perfect_correlation_gives_one(self):
        cov = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
        dr = asy.DistributionResult(np.zeros(3), cov, n_obs=10)
        np.testing.assert_allclose(asy.attribute_error(dr, 1), [1.0], atol=1e-8)

    def test_outputs_in_unit_interval(self, rng):
        theta = rand_unit_corner_theta(rng, 3)
        tm = AugmentedMoment(theta, n_obs=100)
        dist = asy.theta_inverse_covariance(tm, gaussian_omega(tm))
        r2 = asy.attribute_error(dist, 3)
        assert np.all(r2 >= 0.0) and np.all(r2 <= 1.0)
