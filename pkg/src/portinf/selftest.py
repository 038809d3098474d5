"""Fast internal consistency checks for the CLI selftest command."""

from __future__ import annotations

import numpy as np

from . import asymptotics, gaussian, kernels, mglh
from .moments import AugmentedMoment, MomentLayout


def scalar_itheta_cov(mu: float, sg: float) -> np.ndarray:
    """Closed-form covariance of vech of the inverse moment, one Gaussian asset."""
    s2, s4 = sg**2, sg**4
    return np.array([
        [2 * mu**2 * (mu**2 + 2 * s2) / s4, -2 * mu * (mu**2 + s2) / s4, 2 * mu**2 / s4],
        [-2 * mu * (mu**2 + s2) / s4, (2 * mu**2 + s2) / s4, -2 * mu / s4],
        [2 * mu**2 / s4, -2 * mu / s4, 2 / s4],
    ])


def scalar_theta_block(mu: float, sg: float) -> np.ndarray:
    """Closed-form covariance of the random part of vech of the moment matrix."""
    s2 = sg**2
    return np.array([[s2, 2 * mu * s2], [2 * mu * s2, 4 * mu**2 * s2 + 2 * s2**2]])


def scalar_theta(mu: float, sg: float) -> np.ndarray:
    return np.array([[1.0, mu], [mu, mu**2 + sg**2]])


def run(verbose: bool = False) -> bool:
    checks: list[tuple[str, bool]] = []

    def record(name: str, ok: bool):
        checks.append((name, ok))
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'} {name}")

    for n in range(1, 6):
        lhs = kernels.elimination_matrix(n).data @ kernels.duplication_matrix(n).data
        record(f"elimination.duplication identity n={n}",
               np.allclose(lhs, np.eye(kernels.vech_len(n)), atol=1e-14))

    rng = np.random.default_rng(20240817)
    a = rng.standard_normal((3, 3))
    spd = a @ a.T + 3 * np.eye(3)
    jac = kernels.d_inv_vech(spd)
    fd = kernels.finite_difference_jacobian(
        lambda v: kernels.vech(np.linalg.inv(kernels.ivech(v))), kernels.vech(spd))
    record("inverse-vech derivative vs finite differences",
           np.abs(jac - fd).max() < 1e-6)

    for mu, sg in ((1.0, 1.0), (2.0, 0.5)):
        tm = AugmentedMoment(scalar_theta(mu, sg), n_obs=100)
        om = gaussian.gaussian_omega(tm)
        record(f"gaussian omega closed form mu={mu} sg={sg}",
               np.abs(om.omega[1:, 1:] - scalar_theta_block(mu, sg)).max() < 1e-10)
        cov = asymptotics.theta_inverse_covariance(tm, om).covariance
        record(f"scalar inverse-moment grid mu={mu} sg={sg}",
               np.abs(cov - scalar_itheta_cov(mu, sg)).max() < 1e-10)
        record(f"conjecture route mu={mu} sg={sg}",
               np.abs(gaussian.conjecture_itheta_cov(tm) - cov).max() < 1e-10)

    sig_f = np.array([[1.0, 0.1], [0.1, 0.8]])
    bmat = np.array([[0.5, -0.2], [0.1, 0.3]])
    sigma = np.array([[1.0, 0.2], [0.2, 0.6]])
    theta = np.block([[sig_f, sig_f @ bmat.T],
                      [bmat @ sig_f, sigma + bmat @ sig_f @ bmat.T]])
    tm = AugmentedMoment(theta, n_obs=100, layout=MomentLayout.CONDITIONAL, f_dim=2)
    spec = mglh.MglhSpec(np.eye(2), np.eye(2), bmat)
    res = mglh.mglh_statistics(tm, spec)
    record("mglh exact-null anchors",
           max(abs(res.hlt), abs(res.pbt - 2.0), abs(res.wilks - 1.0), abs(res.roy)) < 1e-10)

    return all(ok for _, ok in checks)
