"""Augmented second-moment matrix and its block-inverse unpacking.

The central object: prepend each return row with 1 (or with weighted
features), average the outer products, and read the squared maximal
Sharpe, the (negative) unscaled optimal portfolio, and the precision
matrix straight out of the blocks of the inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    LengthMismatch,
    NonPositiveWeight,
    ShapeMismatch,
    SingularTheta,
    ZeroMeanVector,
)
from .kernels import check_symmetric

PD_RTOL = 1e-12


class MomentLayout(Enum):
    UNCONDITIONAL = "unconditional"   # leading block is the scalar 1
    CONDITIONAL = "conditional"       # leading block is the f-by-f feature gram


@dataclass
class ReturnsPanel:
    """T-by-p array of per-period returns with optional labels."""

    values: np.ndarray
    asset_names: list[str] | None = None
    timestamps: list | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        t, p = self.values.shape
        if not np.all(np.isfinite(self.values)):
            raise ShapeMismatch("returns contain non-finite entries")
        if t < p + 2:
            raise ShapeMismatch(f"need T >= p + 2 observations, got T={t}, p={p}")
        if self.asset_names is None:
            self.asset_names = [f"asset{i + 1}" for i in range(p)]
        if len(self.asset_names) != p:
            raise LengthMismatch("asset_names length does not match column count")

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]


@dataclass
class AugmentedMoment:
    """Symmetric PD second moment of the augmented rows, plus bookkeeping.

    f_dim is the width of the leading block: 1 for the unconditional and
    single-weight layouts, the feature count for the conditional layout.
    """

    theta: np.ndarray
    n_obs: int
    layout: MomentLayout = MomentLayout.UNCONDITIONAL
    f_dim: int = 1

    def __post_init__(self):
        self.theta = check_symmetric(self.theta)
        if self.layout is MomentLayout.UNCONDITIONAL:
            if self.f_dim != 1:
                raise ShapeMismatch("unconditional layout has a scalar leading block")
            # loose gate only: finite-difference probes may nudge the corner
            if abs(self.theta[0, 0] - 1.0) > 1e-3:
                raise ShapeMismatch(
                    f"unconditional corner is {self.theta[0, 0]:.6f}, expected 1")

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    @property
    def n_assets(self) -> int:
        return self.dim - self.f_dim


@dataclass
class ThetaInverseParts:
    """Blocks of the inverse augmented moment.

    neg_portfolio holds the off-diagonal block exactly as it appears in
    the inverse: -precision @ mean for the unconditional layout, the
    negated p-by-f regression multiplier for the conditional one.
    snr_sq is only defined (non-None) when the leading block is scalar.
    """

    corner: np.ndarray
    neg_portfolio: np.ndarray
    precision: np.ndarray
    snr_sq: float | None = None

    @property
    def markowitz(self) -> np.ndarray:
        """The unscaled optimal portfolio (or coefficient), sign flipped back."""
        return -self.neg_portfolio


@dataclass
class PortfolioEstimate:
    """Scaled optimal weights with the objective they attain."""

    weights: np.ndarray
    risk_budget: float
    rfr: float
    snr_sq: float
    objective: float
    asset_names: list[str] = field(default_factory=list)


def augment(
    values: np.ndarray,
    features: np.ndarray | None = None,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Build the T-by-(q+1) augmented rows from returns.

    Rows are [1, x'], or [w, w x'] with scalar weights, or [w f', w x']
    with features. Features and weights must already be lagged by the
    caller so that row i's feature is observable before return row i.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    t = values.shape[0]
    if weights is None:
        w = np.ones(t)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.size != t:
            raise LengthMismatch(f"{w.size} weights for {t} rows")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise NonPositiveWeight("weights must be finite and strictly positive")
    if features is None:
        lead = w[:, None]
    else:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if features.shape[0] != t:
            raise LengthMismatch(f"{features.shape[0]} feature rows for {t} return rows")
        lead = w[:, None] * features
    return np.hstack([lead, w[:, None] * values])


def sample_theta(
    aug_rows: np.ndarray,
    layout: MomentLayout = MomentLayout.UNCONDITIONAL,
    f_dim: int = 1,
) -> AugmentedMoment:
    """Average of row outer products, divisor T, checked for positive definiteness."""
    aug_rows = np.atleast_2d(np.asarray(aug_rows, dtype=float))
    t, d = aug_rows.shape
    if t < d:
        raise ShapeMismatch(f"need at least as many rows as columns, got {aug_rows.shape}")
    theta = aug_rows.T @ aug_rows / t
    theta = 0.5 * (theta + theta.T)
    eigvals = np.linalg.eigvalsh(theta)
    if eigvals[0] < PD_RTOL * max(eigvals[-1], 1e-300):
        raise SingularTheta(
            f"smallest eigenvalue {eigvals[0]:.3e} below {PD_RTOL:.0e} of largest"
        )
    return AugmentedMoment(theta, n_obs=t, layout=layout, f_dim=f_dim)


def theta_inverse(tm: AugmentedMoment) -> np.ndarray:
    """Inverse of the augmented moment, symmetrized."""
    try:
        inv = np.linalg.inv(tm.theta)
    except np.linalg.LinAlgError as exc:
        raise SingularTheta("augmented moment is singular") from exc
    return 0.5 * (inv + inv.T)


def unpack_theta_inverse(tm: AugmentedMoment, f_dim: int | None = None) -> ThetaInverseParts:
    """Read the block structure of the inverse augmented moment.

    For the unconditional layout the corner is 1 + snr_sq, so snr_sq is
    returned with the 1 subtracted. The conditional corner block mixes
    the feature-gram inverse with the coefficient quadratic form and is
    returned whole.
    """
    f = tm.f_dim if f_dim is None else f_dim
    inv = theta_inverse(tm)
    corner = inv[:f, :f].copy()
    neg_port = inv[f:, :f].copy()
    precision = inv[f:, f:].copy()
    snr_sq = None
    if tm.layout is MomentLayout.UNCONDITIONAL:
        snr_sq = float(corner[0, 0]) - 1.0
    if f == 1:
        neg_port = neg_port.ravel()
    return ThetaInverseParts(corner, neg_port, precision, snr_sq)


def mean_and_covariance(tm: AugmentedMoment) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and covariance implied by an unconditional moment matrix."""
    if tm.layout is not MomentLayout.UNCONDITIONAL:
        raise ShapeMismatch("mean/covariance split needs the unconditional layout")
    mu = tm.theta[1:, 0].copy()
    sigma = tm.theta[1:, 1:] - np.outer(mu, mu)
    return mu, sigma


def sr_optimal_portfolio(
    tm: AugmentedMoment,
    risk_budget: float,
    rfr: float = 0.0,
    asset_names: list[str] | None = None,
) -> PortfolioEstimate:
    """Weights maximizing the ratio of excess mean to volatility at a risk budget.

    Solves for w = (R / sqrt(mu' Sigma^-1 mu)) Sigma^-1 mu; the attained
    objective is sqrt(mu' Sigma^-1 mu) - rfr / R.
    """
    if risk_budget <= 0:
        raise ShapeMismatch("risk budget must be positive")
    parts = unpack_theta_inverse(tm)
    mu, _ = mean_and_covariance(tm)
    if np.linalg.norm(mu) <= 1e-12:
        raise ZeroMeanVector("mean vector is numerically zero")
    snr_sq = parts.snr_sq
    if snr_sq is None or snr_sq <= 0:
        raise SingularTheta("squared maximal Sharpe is not positive")
    snr = np.sqrt(snr_sq)
    weights = (risk_budget / snr) * parts.markowitz
    names = asset_names if asset_names is not None else [
        f"asset{i + 1}" for i in range(weights.size)
    ]
    return PortfolioEstimate(
        weights=weights,
        risk_budget=float(risk_budget),
        rfr=float(rfr),
        snr_sq=snr_sq,
        objective=snr - rfr / risk_budget,
        asset_names=names,
    )
