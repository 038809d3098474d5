"""Linear-hypothesis statistics, their dual routes, and their gradients."""

import numpy as np
import pytest

from portinf import mglh
from portinf.asymptotics import OmegaEstimate
from portinf.errors import ShapeMismatch
from portinf.kernels import ivech, vech, vech_len
from portinf.moments import AugmentedMoment, MomentLayout

from conftest import fd_jac, rand_spd


def make_conditional(rng, f, p, b_scale=0.4, n_obs=300):
    sig_f = rand_spd(rng, f) / f
    bmat = b_scale * rng.standard_normal((p, f))
    sigma = rand_spd(rng, p) / p
    theta = np.block([[sig_f, sig_f @ bmat.T],
                      [bmat @ sig_f, sigma + bmat @ sig_f @ bmat.T]])
    tm = AugmentedMoment(theta, n_obs=n_obs, layout=MomentLayout.CONDITIONAL, f_dim=f)
    return tm, sig_f, bmat, sigma


def rand_spec(rng, f, p, a, c, null=False, bmat=None):
    amat = rng.standard_normal((a, p))
    cmat = rng.standard_normal((f, c))
    tmat = amat @ bmat @ cmat if null else rng.standard_normal((a, c))
    return mglh.MglhSpec(amat, cmat, tmat)


class TestSpecValidation:
    def test_rejects_wrong_target_shape(self):
        with pytest.raises(ShapeMismatch):
            mglh.MglhSpec(np.eye(2), np.eye(2), np.zeros((1, 2)))

    def test_rejects_rank_deficient_contrast(self):
        with pytest.raises(mglh.RankDeficient):
            mglh.MglhSpec(np.array([[1.0, 0.0], [2.0, 0.0]]), np.eye(2), np.zeros((2, 2)))


class TestModelErrorMatrices:
    def test_exact_null_kills_model_variance(self, rng):
        tm, _, bmat, _ = make_conditional(rng, 2, 3)
        spec = rand_spec(rng, 2, 3, 2, 2, null=True, bmat=bmat)
        h, e = mglh.mglh_he(tm, spec)
        np.testing.assert_allclose(h, np.zeros((2, 2)), atol=1e-12)
        assert np.linalg.eigvalsh(e)[0] > 0

    def test_identity_plumbing(self):
        theta = np.block([[np.eye(2), np.eye(2)], [np.eye(2), 2 * np.eye(2)]])
        tm = AugmentedMoment(theta, n_obs=100, layout=MomentLayout.CONDITIONAL, f_dim=2)
        spec = mglh.MglhSpec(np.eye(2), np.eye(2), np.zeros((2, 2)))
        h, e = mglh.mglh_he(tm, spec)
        np.testing.assert_allclose(h, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(e, np.eye(2), atol=1e-12)

    def test_random_instance_is_psd(self, rng):
        tm, _, bmat, _ = make_conditional(rng, 3, 3)
        spec = rand_spec(rng, 3, 3, 2, 2)
        h, e = mglh.mglh_he(tm, spec)
        assert np.linalg.eigvalsh(h)[0] > -1e-12
        assert np.linalg.eigvalsh(e)[0] > 0
        assert np.linalg.eigvals(np.linalg.solve(e, h)).real.min() > -1e-12


class TestG1G2:
    def test_null_gives_identity_product(self, rng):
        tm, _, bmat, _ = make_conditional(rng, 2, 2)
        spec = rand_spec(rng, 2, 2, 1, 2, null=True, bmat=bmat)
        g1, g2 = mglh.mglh_g1g2(tm, spec)
        np.testing.assert_allclose(g1 @ g2, np.eye(2), atol=1e-10)

    def test_bordered_route_matches_direct_formula(self, rng):
        tm, sig_f, bmat, sigma = make_conditional(rng, 3, 2)
        spec = rand_spec(rng, 3, 2, 2, 2)
        _, g2 = mglh.mglh_g1g2(tm, spec)
        a, c, t = spec.a_matrix, spec.c_matrix, spec.t_matrix
        resid = a @ bmat @ c - t
        direct = (c.T @ np.linalg.solve(sig_f, c)
                  + resid.T @ np.linalg.solve(a @ sigma @ a.T, resid))
        np.testing.assert_allclose(g2, direct, atol=1e-10)

    @pytest.mark.parametrize("trial", range(50))
    def test_eigenvalue_equivalence_with_he_route(self, trial):
        rng = np.random.default_rng(8000 + trial)
        f, p = rng.integers(2, 4), rng.integers(2, 4)
        a, c = rng.integers(1, p + 1), rng.integers(1, f + 1)
        tm, _, bmat, _ = make_conditional(rng, f, p)
        spec = rand_spec(rng, f, p, a, c)
        g1, g2 = mglh.mglh_g1g2(tm, spec)
        h, e = mglh.mglh_he(tm, spec)
        size = max(a, c)
        eig1 = np.sort(np.linalg.eigvals(g1 @ g2).real)
        eig2 = np.sort(np.linalg.eigvals(np.eye(a) + np.linalg.solve(e, h)).real)
        pad1 = np.sort(np.concatenate([eig1, np.ones(size - c)]))
        pad2 = np.sort(np.concatenate([eig2, np.ones(size - a)]))
        np.testing.assert_allclose(pad1, pad2, atol=1e-10)


class TestStatistics:
    def test_null_anchor_values(self, rng):
        tm, _, bmat, _ = make_conditional(rng, 3, 3)
        spec = rand_spec(rng, 3, 3, 2, 2, null=True, bmat=bmat)
        res = mglh.mglh_statistics(tm, spec)
        assert res.hlt == pytest.approx(0.0, abs=1e-10)
        assert res.pbt == pytest.approx(2.0, abs=1e-10)
        assert res.wilks == pytest.approx(1.0, abs=1e-10)
        assert res.roy == pytest.approx(0.0, abs=1e-10)

    def test_matches_eigenvalue_definitions(self, rng):
        tm, _, _, _ = make_conditional(rng, 3, 3)
        spec = rand_spec(rng, 3, 3, 3, 2)
        res = mglh.mglh_statistics(tm, spec)
        h, e = mglh.mglh_he(tm, spec)
        lam = np.linalg.eigvals(np.linalg.solve(e, h)).real
        assert res.hlt == pytest.approx(lam.sum(), abs=1e-10)
        assert res.pbt == pytest.approx(np.sum(1.0 / (1.0 + lam)), abs=1e-10)
        assert res.wilks == pytest.approx(np.prod(1.0 / (1.0 + lam)), abs=1e-10)
        assert res.roy == pytest.approx(lam.max(), abs=1e-10)

    def test_scalar_reduction_is_variance_ratio(self):
        sig_f, b, sigma = 2.0, 0.7, 0.5
        theta = np.array([[sig_f, sig_f * b], [sig_f * b, sigma + b * sig_f * b]])
        tm = AugmentedMoment(theta, n_obs=50, layout=MomentLayout.CONDITIONAL, f_dim=1)
        spec = mglh.MglhSpec([[1.0]], [[1.0]], [[0.0]])
        res = mglh.mglh_statistics(tm, spec)
        h_scalar = b**2 * sig_f
        assert res.hlt == pytest.approx(h_scalar / sigma, rel=1e-12)

    @pytest.mark.parametrize("trial", range(10))
    def test_result_bounds(self, trial):
        rng = np.random.default_rng(4100 + trial)
        tm, _, _, _ = make_conditional(rng, 3, 3)
        spec = rand_spec(rng, 3, 3, 2, 2)
        res = mglh.mglh_statistics(tm, spec)
        assert res.hlt >= -1e-10
        assert 0.0 < res.wilks <= 1.0 + 1e-10
        assert res.roy >= -1e-10
        assert res.pbt <= spec.n_rows + 1e-10

    def test_invariance_to_matched_row_scaling(self, rng):
        tm, _, bmat, _ = make_conditional(rng, 2, 3)
        amat = rng.standard_normal((2, 3))
        cmat = rng.standard_normal((2, 2))
        tmat = rng.standard_normal((2, 2))
        res1 = mglh.mglh_statistics(tm, mglh.MglhSpec(amat, cmat, tmat))
        res2 = mglh.mglh_statistics(tm, mglh.MglhSpec(5.0 * amat, cmat, 5.0 * tmat))
        for k in mglh.STAT_NAMES:
            assert res2.as_dict()[k] == pytest.approx(res1.as_dict()[k], rel=1e-10)


class TestDerivatives:
    def _fd_all(self, tm, spec):
        def stat_map(v):
            t = AugmentedMoment(ivech(v), n_obs=tm.n_obs,
                                layout=MomentLayout.CONDITIONAL, f_dim=tm.f_dim)
            r = mglh.mglh_statistics(t, spec)
            return np.array([r.hlt, r.pbt, r.wilks, r.roy])

        return fd_jac(stat_map, vech(tm.theta))

    @pytest.mark.parametrize("dims", [(2, 2, 1, 1), (2, 2, 2, 2), (3, 2, 2, 2), (2, 3, 3, 1)])
    def test_matches_finite_differences(self, dims, rng):
        f, p, a, c = dims
        tm, _, bmat, _ = make_conditional(rng, f, p)
        spec = rand_spec(rng, f, p, a, c)
        grads = mglh.mglh_derivatives(tm, spec)
        fd = self._fd_all(tm, spec)
        for i, name in enumerate(mglh.STAT_NAMES):
            np.testing.assert_allclose(grads[name], fd[i], atol=1e-6,
                                       err_msg=f"gradient of {name}")

    def test_under_exact_null(self, rng):
        tm, _, bmat, _ = make_conditional(rng, 2, 2)
        spec = rand_spec(rng, 2, 2, 1, 1, null=True, bmat=bmat)
        grads = mglh.mglh_derivatives(tm, spec)
        fd = self._fd_all(tm, spec)
        for i, name in enumerate(mglh.STAT_NAMES):
            np.testing.assert_allclose(grads[name], fd[i], atol=1e-6)

    def test_scalar_quotient_rule(self):
        sig_f, b, sigma = 2.0, 0.7, 0.5
        theta = np.array([[sig_f, sig_f * b], [sig_f * b, sigma + b * sig_f * b]])
        tm = AugmentedMoment(theta, n_obs=50, layout=MomentLayout.CONDITIONAL, f_dim=1)
        spec = mglh.MglhSpec([[1.0]], [[1.0]], [[0.0]])
        grads = mglh.mglh_derivatives(tm, spec)
        fd = self._fd_all(tm, spec)
        np.testing.assert_allclose(grads["hlt"], fd[0], atol=1e-8)


class TestAsymptotic:
    def test_all_four_variances_match_monte_carlo(self):
        # the acceptance gate pins only the trace statistic; this checks
        # the other three gradients carry correct variances too
        from portinf.gaussian import omega_gaussian_centered
        from portinf.kernels import chol

        sig_f = np.array([[1.0, 0.2], [0.2, 1.0]])
        bmat = np.array([[0.3, 0.1], [-0.2, 0.25]])
        sigma = np.array([[1.0, 0.3], [0.3, 0.8]])
        theta_pop = np.block([[sig_f, sig_f @ bmat.T],
                              [bmat @ sig_f, sigma + bmat @ sig_f @ bmat.T]])
        t, trials = 1500, 3000
        tm_pop = AugmentedMoment(theta_pop, n_obs=t,
                                 layout=MomentLayout.CONDITIONAL, f_dim=2)
        spec = mglh.MglhSpec(np.eye(2), np.eye(2), np.zeros((2, 2)))
        grads = mglh.mglh_derivatives(tm_pop, spec)
        om = omega_gaussian_centered(theta_pop)
        theo = {k: float(q @ om @ q) for k, q in grads.items()}

        rng = np.random.default_rng(31415)
        cf, cs = chol(sig_f), chol(sigma)
        vals = {k: [] for k in mglh.STAT_NAMES}
        for _ in range(6):
            zf = rng.standard_normal((trials // 6, t, 2))
            ze = rng.standard_normal((trials // 6, t, 2))
            f = zf @ cf.T
            x = f @ bmat.T + ze @ cs.T
            rows = np.concatenate([f, x], axis=2)
            thetas = np.einsum("cti,ctj->cij", rows, rows) / t
            for th in thetas:
                tm = AugmentedMoment(th, n_obs=t, layout=MomentLayout.CONDITIONAL, f_dim=2)
                r = mglh.mglh_statistics(tm, spec)
                for k in mglh.STAT_NAMES:
                    vals[k].append(r.as_dict()[k])
        for k in mglh.STAT_NAMES:
            emp = t * np.var(np.array(vals[k]), ddof=1)
            assert abs(emp - theo[k]) / theo[k] < 0.20, k

    def test_zero_omega_gives_zero_variances(self, rng):
        tm, _, _, _ = make_conditional(rng, 2, 2)
        spec = rand_spec(rng, 2, 2, 2, 2)
        om = OmegaEstimate(np.zeros((vech_len(4), vech_len(4))), "vanilla", n_obs=100)
        res = mglh.mglh_asymptotic(tm, spec, om)
        assert all(v == 0.0 for v in res.variances.values())

    def test_variances_nonnegative(self, rng):
        tm, _, _, _ = make_conditional(rng, 2, 3)
        spec = rand_spec(rng, 2, 3, 2, 2)
        om = OmegaEstimate(rand_spd(rng, vech_len(5)), "vanilla", n_obs=100)
        res = mglh.mglh_asymptotic(tm, spec, om)
        assert all(v >= 0.0 for v in res.variances.values())
        assert "approximation" in res.note
