"""Constrained and conditional portfolio estimators.

Subspace-restricted and hedged portfolios work by projecting the moment
matrix through an augmented basket/hedge matrix; conditional models feed
weighted feature rows into the same machinery; equality constraints on
the Cholesky factor are imposed by weighted projection; rank constraints
go through the truncated eigendecomposition with a numeric Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import block_diag

from .asymptotics import DistributionResult, OmegaEstimate, _check_dims
from .errors import (
    EigGapTooSmall,
    NonPositiveVolFeature,
    RankDeficient,
    RankDeficientHedge,
    ShapeMismatch,
    SingularProjection,
    SingularWeighting,
)
from .kernels import (
    MatrixShape,
    chol,
    commutation_matrix,
    d_inv_vech,
    d_qform_inv,
    duplication_matrix,
    eigen_sym,
    elimination_matrix,
    fd_step,
    finite_difference_jacobian,
    ivech,
    kron,
    pinv_rank,
    vech,
    vech_len,
    vech_lower,
)
from .moments import (
    AugmentedMoment,
    MomentLayout,
    augment,
    sample_theta,
    theta_inverse,
    unpack_theta_inverse,
)

RANK_RTOL = 1e-10


class ConditionalModel(Enum):
    CONSTANT_SR = "constant"       # weights rescale returns, corner stays 1
    FLOATING_SR = "floating"       # weights enter the leading coordinate
    BICONDITIONAL = "biconditional"  # weighted features lead the row


@dataclass
class SubspaceSpec:
    """Feasible baskets: rows of J span the allowed portfolio subspace.

    Rows are re-orthonormalized on ingestion; the projection formulas
    require J J' = I.
    """

    basket: np.ndarray

    def __post_init__(self):
        j = np.atleast_2d(np.asarray(self.basket, dtype=float))
        q, _ = np.linalg.qr(j.T)
        svals = np.linalg.svd(j, compute_uv=False)
        if svals[-1] < RANK_RTOL * max(svals[0], 1e-300):
            raise RankDeficient("basket rows are not linearly independent")
        self.basket = q.T

    @property
    def n_baskets(self) -> int:
        return self.basket.shape[0]

    def augmented(self, f_dim: int) -> np.ndarray:
        return block_diag(np.eye(f_dim), self.basket)


@dataclass
class HedgeSpec:
    """Streams to hedge against: feasible portfolios have zero covariance
    with every row of G."""

    hedge: np.ndarray

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.hedge, dtype=float))
        svals = np.linalg.svd(g, compute_uv=False)
        if svals[-1] < RANK_RTOL * max(svals[0], 1e-300):
            raise RankDeficientHedge("hedge matrix is rank deficient")
        self.hedge = g

    @property
    def n_hedges(self) -> int:
        return self.hedge.shape[0]

    def augmented(self, f_dim: int) -> np.ndarray:
        return block_diag(np.eye(f_dim), self.hedge)


@dataclass
class CholeskyConstraint:
    """Equality constraints B vech(chol(theta)) = b with SPD weighting W."""

    b_matrix: np.ndarray
    b_vector: np.ndarray
    weighting: np.ndarray | None = None

    def __post_init__(self):
        self.b_matrix = np.atleast_2d(np.asarray(self.b_matrix, dtype=float))
        self.b_vector = np.asarray(self.b_vector, dtype=float).ravel()
        if self.b_matrix.shape[0] != self.b_vector.size:
            raise ShapeMismatch("one target per constraint row")

    @property
    def n_constraints(self) -> int:
        return self.b_vector.size


def _project_core(jt: np.ndarray, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(J~ theta J~')^-1 and the projection J~' (...)^-1 J~."""
    core = jt @ theta @ jt.T
    try:
        core_inv = np.linalg.inv(core)
    except np.linalg.LinAlgError as exc:
        raise SingularProjection("projected moment is singular") from exc
    core_inv = 0.5 * (core_inv + core_inv.T)
    return core_inv, jt.T @ core_inv @ jt


def subspace_theta(
    tm: AugmentedMoment, spec: SubspaceSpec, om: OmegaEstimate
) -> tuple[np.ndarray, DistributionResult]:
    """Projection of the inverse moment onto the feasible baskets, with its law."""
    _check_dims(tm, om)
    jt = spec.augmented(tm.f_dim)
    _, proj = _project_core(jt, tm.theta)
    point = vech(proj)
    d = tm.dim
    el = elimination_matrix(d).data
    du = duplication_matrix(d).data
    h = el @ kron(jt.T, jt.T) @ d_qform_inv(jt, tm.theta) @ du
    cov = h @ om.omega @ h.T
    return point, DistributionResult(point, cov, om.n_obs)


def hedged_delta_theta(
    tm: AugmentedMoment, spec: HedgeSpec, om: OmegaEstimate
) -> tuple[np.ndarray, DistributionResult]:
    """Inverse moment minus its hedge projection, with its asymptotic law.

    The corner of the delta is the hedged squared Sharpe; the off-corner
    column holds the negated hedged portfolio direction.
    """
    _check_dims(tm, om)
    gt = spec.augmented(tm.f_dim)
    _, proj = _project_core(gt, tm.theta)
    delta = theta_inverse(tm) - proj
    point = vech(delta)
    d = tm.dim
    el = elimination_matrix(d).data
    du = duplication_matrix(d).data
    h = d_inv_vech(tm.theta) - el @ kron(gt.T, gt.T) @ d_qform_inv(gt, tm.theta) @ du
    cov = h @ om.omega @ h.T
    return point, DistributionResult(point, cov, om.n_obs)


def hedged_conditional_delta(
    tm: AugmentedMoment, spec: HedgeSpec, om: OmegaEstimate
) -> tuple[np.ndarray, DistributionResult]:
    """Hedged delta for the conditional layout; the hedge augmentation
    carries an identity block of the feature width."""
    return hedged_delta_theta(tm, spec, om)


def subspace_weights(point: np.ndarray, n_assets: int, risk_budget: float) -> np.ndarray:
    """Scaled weights from a vech'd subspace projection (scalar leading block)."""
    corner = point[0] - 1.0
    if corner <= 0:
        raise SingularProjection("projected squared Sharpe is not positive")
    return -(risk_budget / np.sqrt(corner)) * point[1 : n_assets + 1]


def hedged_weights(point: np.ndarray, n_assets: int, risk_budget: float) -> np.ndarray:
    """Scaled weights from a vech'd hedged delta (scalar leading block)."""
    corner = point[0]
    if corner <= 0:
        raise SingularProjection("hedged squared Sharpe is not positive")
    return -(risk_budget / np.sqrt(corner)) * point[1 : n_assets + 1]


def conditional_rows(
    values: np.ndarray,
    features: np.ndarray | None = None,
    weights: np.ndarray | None = None,
    model: ConditionalModel = ConditionalModel.CONSTANT_SR,
) -> tuple[np.ndarray, MomentLayout, int]:
    """Augmented rows under a conditional-heteroskedasticity model.

    CONSTANT_SR rescales returns by the weights and keeps the unit
    corner; FLOATING_SR puts the weight in the leading coordinate;
    BICONDITIONAL leads with weighted features. Features and weights
    must be lagged by the caller.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if features is not None and model is not ConditionalModel.BICONDITIONAL:
        raise ShapeMismatch(f"features require the biconditional model, not {model.value}")
    if model is ConditionalModel.CONSTANT_SR:
        if weights is not None:
            w = np.asarray(weights, dtype=float).ravel()
            if np.any(~np.isfinite(w)) or np.any(w <= 0):
                raise NonPositiveVolFeature("weights must be finite and positive")
            values = values * w[:, None]
        return augment(values), MomentLayout.UNCONDITIONAL, 1
    if model is ConditionalModel.FLOATING_SR:
        return augment(values, weights=weights), MomentLayout.CONDITIONAL, 1
    if features is None:
        raise ShapeMismatch("biconditional model needs features")
    rows = augment(values, features=features, weights=weights)
    return rows, MomentLayout.CONDITIONAL, np.atleast_2d(features).shape[1]


def conditional_theta(
    values: np.ndarray,
    features: np.ndarray | None = None,
    weights: np.ndarray | None = None,
    model: ConditionalModel = ConditionalModel.CONSTANT_SR,
) -> AugmentedMoment:
    """Augmented moment under a conditional model; see conditional_rows."""
    rows, layout, f_dim = conditional_rows(values, features, weights, model)
    return sample_theta(rows, layout, f_dim=f_dim)


def _coefficient_coords(d: int, f: int) -> list[int]:
    """vech coordinates of the lower-left block, column-major."""
    offsets = [j * d - j * (j - 1) // 2 for j in range(d)]
    return [offsets[j] + (i - j) for j in range(f) for i in range(f, d)]


def markowitz_coefficient(
    tm: AugmentedMoment, om: OmegaEstimate, f_dim: int | None = None
) -> tuple[np.ndarray, DistributionResult]:
    """Feature-to-weights multiplier and its asymptotic law.

    The coefficient is the sign-flipped lower-left block of the inverse
    conditional moment; its covariance marginalizes the inverse-moment
    law to those coordinates.
    """
    _check_dims(tm, om)
    f = tm.f_dim if f_dim is None else f_dim
    d = tm.dim
    p = d - f
    parts = unpack_theta_inverse(tm, f)
    coef = parts.markowitz.reshape(p, f, order="F") if f > 1 else parts.markowitz.reshape(p, 1)
    h = d_inv_vech(tm.theta)
    cov_full = h @ om.omega @ h.T
    coords = _coefficient_coords(d, f)
    point = coef.reshape(-1, order="F")
    cov = cov_full[np.ix_(coords, coords)]
    labels = [f"coef[{i},{j}]" for j in range(f) for i in range(p)]
    return coef, DistributionResult(point, cov, om.n_obs, labels=labels)


def flatten_volatility(
    values: np.ndarray, vol_features: np.ndarray
) -> tuple[np.ndarray, list[SubspaceSpec]]:
    """Expand each return row against a vector of volatility features.

    Row t of the output is vec of the outer product of the return row
    with the (already lagged) volatility row, i.e. p*v pseudo-assets.
    The t-th basket constrains portfolios on the expanded assets to ones
    expressible on the original assets at time t: its rows are the
    Hadamard-inverse volatility blocks, orthonormalized, ready for the
    subspace projection machinery.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    vol = np.atleast_2d(np.asarray(vol_features, dtype=float))
    if vol.shape[0] != values.shape[0]:
        raise ShapeMismatch("volatility rows must match return rows")
    if np.any(~np.isfinite(vol)) or np.any(vol <= 0):
        raise NonPositiveVolFeature("volatility features must be finite and positive")
    t, p = values.shape
    v = vol.shape[1]
    # row t is vec(x_t l_t'), column-major over the p-by-v outer product
    expanded = (values[:, :, None] * vol[:, None, :]).transpose(0, 2, 1).reshape(t, p * v)
    baskets = []
    for i in range(t):
        linv = 1.0 / vol[i]
        j = np.kron(np.eye(p), linv[None, :])  # p rows over p*v expanded assets
        baskets.append(SubspaceSpec(j))
    return expanded, baskets


def inverse_variance_weighting(om: OmegaEstimate) -> np.ndarray:
    """Diagonal weighting from the reciprocal omega diagonal.

    One candidate for the constrained-projection weighting matrix; the
    right choice is an open problem, so this carries no endorsement.
    Zero-variance coordinates get the largest finite weight.
    """
    diag = np.diag(om.omega).copy()
    floor = 1e-12 * max(diag.max(), 1e-300)
    return np.diag(1.0 / np.clip(diag, floor, None))


def constrained_cholesky_estimate(
    tm: AugmentedMoment, cc: CholeskyConstraint, om: OmegaEstimate
) -> tuple[AugmentedMoment, DistributionResult]:
    """Moment estimate satisfying linear constraints on its Cholesky factor.

    Solves the W-weighted projection of vech(chol(theta)) onto the
    constraint plane, rebuilds the moment from the projected factor, and
    chains the gram, projection, and Cholesky Jacobians for the law.
    """
    _check_dims(tm, om)
    d = tm.dim
    m = vech_len(d)
    factor = chol(tm.theta)
    y = vech_lower(factor)
    n_c = cc.n_constraints

    if n_c == 0:
        proj = np.eye(m)
        z = y
    else:
        bmat = cc.b_matrix
        if bmat.shape[1] != m:
            raise ShapeMismatch(f"constraint columns {bmat.shape[1]} != vech length {m}")
        w = np.eye(m) if cc.weighting is None else np.asarray(cc.weighting, dtype=float)
        try:
            winv_bt = np.linalg.solve(w, bmat.T)
            gram = bmat @ winv_bt
            gram_inv = np.linalg.inv(gram)
        except np.linalg.LinAlgError as exc:
            raise SingularWeighting("weighted constraint gram is singular") from exc
        proj = np.eye(m) - winv_bt @ gram_inv @ bmat
        z = winv_bt @ gram_inv @ cc.b_vector + proj @ y

    factor_c = ivech(z, MatrixShape.LOWER_TRIANGULAR)
    theta_c = factor_c @ factor_c.T
    el = elimination_matrix(d).data
    ka = commutation_matrix(d).data
    h1 = el @ (np.eye(d * d) + ka) @ kron(factor_c, np.eye(d))
    h2 = el.T @ proj
    inner = el @ (np.eye(d * d) + ka) @ kron(factor, np.eye(d)) @ el.T
    h3 = np.linalg.inv(inner)
    h = h1 @ h2 @ h3
    cov = h @ om.omega @ h.T
    point = vech(theta_c)
    out = AugmentedMoment(theta_c, tm.n_obs, layout=tm.layout, f_dim=tm.f_dim)
    return out, DistributionResult(point, cov, om.n_obs)


def reduced_rank_coefficient(
    tm: AugmentedMoment, r: int, om: OmegaEstimate, f_dim: int | None = None
) -> tuple[np.ndarray, DistributionResult]:
    """Coefficient from the rank-r pseudoinverse of the conditional moment.

    The covariance Jacobian is taken by central finite differences of the
    whole map vech(theta) -> vec(coefficient); the eigen-derivative chain
    is too unwieldy to carry in closed form.
    """
    _check_dims(tm, om)
    f = tm.f_dim if f_dim is None else f_dim
    d = tm.dim
    p = d - f
    vals, _ = eigen_sym(tm.theta)
    if r < 1 or r > d:
        raise ShapeMismatch(f"rank {r} out of range 1..{d}")
    if r < d and vals[r - 1] - vals[r] <= RANK_RTOL * max(vals[0], 1e-300):
        raise EigGapTooSmall(
            f"gap {vals[r - 1] - vals[r]:.3e} at rank {r} below {RANK_RTOL:.0e} of leading eigenvalue"
        )

    def coef_map(v: np.ndarray) -> np.ndarray:
        theta = ivech(v, MatrixShape.SYMMETRIC)
        pinv = pinv_rank(theta, r)
        return -pinv[f:, :f].reshape(-1, order="F")

    v0 = vech(tm.theta)
    point = coef_map(v0)
    jac = finite_difference_jacobian(coef_map, v0, h=fd_step(tm.theta))
    cov = jac @ om.omega @ jac.T
    coef = -pinv_rank(tm.theta, r)[f:, :f]
    labels = [f"coef[{i},{j}]" for j in range(f) for i in range(p)]
    return coef, DistributionResult(point, cov, om.n_obs, labels=labels)
