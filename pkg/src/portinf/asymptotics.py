"""Covariance of the vectorized outer products and its delta-method chains.

Everything downstream of the central limit theorem lives here: estimate
the covariance of vech(row outer products) from data (plain or kernel
weighted for serial dependence), then push it through Jacobians to get
covariances for the inverse moment matrix, the scaled optimal portfolio,
and the signal-noise ratio.

Covariances follow the per-observation convention: results store the
asymptotic covariance of sqrt(n) times the estimator, so Var(estimate)
is covariance / n_obs.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    BandwidthTooLarge,
    DegenerateCorrelation,
    NonPositiveRfr,
    ShapeMismatch,
    ZeroSharpe,
)
from .kernels import d_inv_vech, vech, vech_indices, vech_len
from .moments import AugmentedMoment, MomentLayout, mean_and_covariance, theta_inverse, unpack_theta_inverse

logger = logging.getLogger(__name__)

HAC_KERNELS = ("bartlett", "parzen")


@dataclass
class OmegaEstimate:
    """Covariance of vech of the per-row outer products, with provenance."""

    omega: np.ndarray
    estimator: str              # "vanilla", "hac", or "gaussian"
    n_obs: int
    kernel: str | None = None
    bandwidth: int | None = None

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        m = self.omega.shape[0]
        if self.omega.shape != (m, m):
            raise ShapeMismatch("omega must be square")

    @property
    def dim(self) -> int:
        return self.omega.shape[0]


@dataclass
class DistributionResult:
    """Point estimate with per-observation asymptotic covariance."""

    point: np.ndarray
    covariance: np.ndarray
    n_obs: int
    labels: list[str] | None = None

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float).ravel()
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (self.point.size, self.point.size):
            raise ShapeMismatch(
                f"covariance {cov.shape} does not match point of length {self.point.size}"
            )
        scale = max(np.abs(cov).max(), 1e-300)
        asym = np.abs(cov - cov.T).max()
        if asym > 1e-10 * scale:
            warnings.warn(f"covariance asymmetry {asym:.2e} above 1e-10 relative", RuntimeWarning)
        self.covariance = 0.5 * (cov + cov.T)

    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None) / self.n_obs)


def vech_outer_rows(aug_rows: np.ndarray) -> np.ndarray:
    """vech(r r') for every augmented row r, one result per row."""
    aug_rows = np.atleast_2d(np.asarray(aug_rows, dtype=float))
    rows, cols = vech_indices(aug_rows.shape[1])
    return aug_rows[:, rows] * aug_rows[:, cols]


def omega_vanilla(aug_rows: np.ndarray) -> OmegaEstimate:
    """Sample covariance (divisor T) of the per-row vech outer products."""
    y = vech_outer_rows(aug_rows)
    t = y.shape[0]
    if t < 2:
        raise ShapeMismatch("need at least two rows")
    yc = y - y.mean(axis=0)
    omega = yc.T @ yc / t
    return OmegaEstimate(0.5 * (omega + omega.T), "vanilla", n_obs=t)


def default_bandwidth(t: int) -> int:
    """Rule-of-thumb lag count, floor(1.2 T^(1/3))."""
    return max(1, int(np.floor(1.2 * t ** (1.0 / 3.0))))


def _kernel_weight(kernel: str, k: int, bandwidth: int) -> float:
    z = k / (bandwidth + 1.0)
    if kernel == "bartlett":
        return 1.0 - z
    if kernel == "parzen":
        if z <= 0.5:
            return 1.0 - 6.0 * z**2 + 6.0 * z**3
        return 2.0 * (1.0 - z) ** 3
    raise ShapeMismatch(f"unknown kernel {kernel!r}, expected one of {HAC_KERNELS}")


def omega_hac(aug_rows: np.ndarray, kernel: str = "bartlett", bandwidth: int | None = None) -> OmegaEstimate:
    """Kernel-weighted long-run covariance of the vech outer-product series.

    Gamma_0 + sum_k w(k) (Gamma_k + Gamma_k') on the demeaned series,
    symmetrized and eigenvalue-clipped to positive semidefinite.
    """
    y = vech_outer_rows(aug_rows)
    t = y.shape[0]
    if bandwidth is None:
        bandwidth = default_bandwidth(t)
    if bandwidth >= t:
        raise BandwidthTooLarge(f"bandwidth {bandwidth} must be below T={t}")
    yc = y - y.mean(axis=0)
    omega = yc.T @ yc / t
    for k in range(1, bandwidth + 1):
        gamma = yc[k:].T @ yc[:-k] / t
        omega += _kernel_weight(kernel, k, bandwidth) * (gamma + gamma.T)
    omega = 0.5 * (omega + omega.T)
    vals, vecs = np.linalg.eigh(omega)
    if vals[0] < 0:
        logger.warning("HAC estimate indefinite (min eig %.3e); clipping to PSD", vals[0])
        omega = vecs @ np.diag(np.clip(vals, 0.0, None)) @ vecs.T
        omega = 0.5 * (omega + omega.T)
    return OmegaEstimate(omega, "hac", n_obs=t, kernel=kernel, bandwidth=bandwidth)


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clipped to zero."""
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _check_dims(tm: AugmentedMoment, om: OmegaEstimate):
    m = vech_len(tm.dim)
    if om.dim != m:
        raise ShapeMismatch(f"omega of size {om.dim} does not match vech length {m}")


def theta_inverse_covariance(tm: AugmentedMoment, om: OmegaEstimate) -> DistributionResult:
    """Asymptotic law of vech of the inverse moment matrix.

    The Jacobian is the vech inverse rule evaluated at the sample moment;
    the covariance is the sandwich of omega with it.
    """
    _check_dims(tm, om)
    h = d_inv_vech(tm.theta)
    point = vech(theta_inverse(tm))
    cov = h @ om.omega @ h.T
    return DistributionResult(point, cov, om.n_obs, labels=_vech_labels(tm.dim))


def _vech_labels(d: int) -> list[str]:
    rows, cols = vech_indices(d)
    return [f"itheta[{i},{j}]" for i, j in zip(rows, cols)]


def _portfolio_jacobian_chain(tm: AugmentedMoment, risk_budget: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Weights, their Jacobian w.r.t. vech(theta), and snr_sq."""
    if tm.layout is not MomentLayout.UNCONDITIONAL:
        raise ShapeMismatch("portfolio chain is defined for the unconditional layout")
    p = tm.n_assets
    parts = unpack_theta_inverse(tm)
    snr_sq = parts.snr_sq
    if snr_sq is None or snr_sq <= 1e-12:
        raise ZeroSharpe("squared maximal Sharpe is numerically zero")
    snr = np.sqrt(snr_sq)
    weights = (risk_budget / snr) * parts.markowitz
    m = vech_len(tm.dim)
    # d weights / d vech(theta^-1): [-w/(2 psi^2), -(R/psi) I, 0]
    front = np.zeros((p, m))
    front[:, 0] = -weights / (2.0 * snr_sq)
    front[:, 1 : p + 1] = -(risk_budget / snr) * np.eye(p)
    h = front @ d_inv_vech(tm.theta)
    return weights, h, snr_sq


def portfolio_covariance(tm: AugmentedMoment, om: OmegaEstimate, risk_budget: float) -> DistributionResult:
    """Asymptotic law of the risk-budgeted optimal weights."""
    _check_dims(tm, om)
    weights, h, _ = _portfolio_jacobian_chain(tm, risk_budget)
    cov = h @ om.omega @ h.T
    return DistributionResult(weights, cov, om.n_obs,
                              labels=[f"w[{k}]" for k in range(weights.size)])


def snr_variance(tm: AugmentedMoment, om: OmegaEstimate, risk_budget: float, rfr: float) -> float:
    """Per-observation variance of the achieved signal-noise ratio.

    First-order law; only valid with a strictly positive disastrous rate,
    since the gradient of the ratio vanishes at the optimum when rfr = 0.
    """
    if rfr <= 0:
        raise NonPositiveRfr("first-order law needs rfr > 0; use snr_second_order")
    if risk_budget <= 0:
        raise ShapeMismatch("risk budget must be positive")
    _check_dims(tm, om)
    parts = unpack_theta_inverse(tm)
    snr_sq = parts.snr_sq
    if snr_sq is None or snr_sq <= 1e-12:
        raise ZeroSharpe("squared maximal Sharpe is numerically zero")
    mu, _ = mean_and_covariance(tm)
    p = tm.n_assets
    m = vech_len(tm.dim)
    row = np.zeros(m)
    row[0] = 0.5
    row[1 : p + 1] = mu
    h = -(rfr / (risk_budget * snr_sq)) * (row @ d_inv_vech(tm.theta))
    return float(h @ om.omega @ h)


def snr_second_order(tm: AugmentedMoment, om: OmegaEstimate, risk_budget: float) -> tuple[np.ndarray, np.ndarray]:
    """Curvature matrix F and mixing matrix M of the second-order ratio law.

    n (SNR(w_hat) - snr) converges to 0.5 z' M' F M z with standard normal
    z; its mean is 0.5 tr(M' F M). M uses a symmetric PSD square root of
    omega (omega is singular in the unconditional layout, so a Cholesky
    factor proper does not exist; the law only depends on M M').
    """
    _check_dims(tm, om)
    weights, h, snr_sq = _portfolio_jacobian_chain(tm, risk_budget)
    snr = np.sqrt(snr_sq)
    mu, sigma = mean_and_covariance(tm)
    f = (np.outer(mu, mu) / snr - snr * sigma) / risk_budget**2
    m = h @ psd_sqrt(om.omega)
    return f, m


def wald_statistics(dr: DistributionResult) -> np.ndarray:
    """Elementwise z-scores, point over standard error.

    Entries whose variance underflows come back as signed infinity (zero
    for an exactly-zero point) with a warning as the flag.
    """
    var = np.diag(dr.covariance) / dr.n_obs
    z = np.zeros_like(dr.point)
    tiny = var < 1e-300
    if np.any(tiny & (dr.point != 0)):
        warnings.warn("degenerate variance entries reported as signed infinity", RuntimeWarning)
    nonzero = tiny & (dr.point != 0)
    z[nonzero] = np.sign(dr.point[nonzero]) * np.inf
    z[~tiny] = dr.point[~tiny] / np.sqrt(var[~tiny])
    return z


def attribute_error(dr: DistributionResult, p: int) -> np.ndarray:
    """Share of each portfolio element's variance explained by precision error.

    Works on the covariance of vech of the inverse unconditional moment:
    coordinates 1..p are the (negative) portfolio, the rest of the tail
    is the precision matrix. Returns the squared multiple correlation of
    each portfolio element against all precision coordinates.
    """
    m = dr.point.size
    if m < vech_len(p + 1):
        raise ShapeMismatch("result too short for the stated asset count")
    diag = np.diag(dr.covariance).copy()
    port_idx = np.arange(1, p + 1)
    prec_idx = np.arange(p + 1, m)
    needed = np.concatenate([port_idx, prec_idx])
    if np.any(diag[needed] < 1e-300):
        raise DegenerateCorrelation("zero variance on a required coordinate")
    scale = np.sqrt(diag)
    corr = dr.covariance / np.outer(scale, scale)
    r_prec = corr[np.ix_(prec_idx, prec_idx)]
    out = np.empty(p)
    for k, j in enumerate(port_idx):
        r = corr[prec_idx, j]
        val = float(r @ np.linalg.solve(r_prec, r))
        if not -1e-10 <= val <= 1.0 + 1e-10:
            raise DegenerateCorrelation(f"multiple correlation {val:.6f} outside [0, 1]")
        out[k] = min(max(val, 0.0), 1.0)
    return out
