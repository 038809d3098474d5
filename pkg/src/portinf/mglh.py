"""Multivariate general linear hypothesis statistics and their asymptotics.

Tests A B C = T on the coefficient of a multivariate regression encoded
in a conditional moment matrix. The statistics are computed from a pair
of small matrices read off a bordered inversion of the moment matrix;
the classical model/error-variance route is kept alongside as an oracle
(the two share eigenvalues). Gradients with respect to the moment matrix
feed normal-approximation variances for all four statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag, eigh

from .asymptotics import DistributionResult, OmegaEstimate, _check_dims
from .errors import (
    RankDeficient,
    RepeatedEigenvalue,
    ShapeMismatch,
    SingularCquad,
    SingularTheta,
)
from .kernels import d_qform_inv, duplication_matrix, kron
from .moments import AugmentedMoment, MomentLayout

EIG_GAP_RTOL = 1e-10
STAT_NAMES = ("hlt", "pbt", "wilks", "roy")


@dataclass
class MglhSpec:
    """Hypothesis A B C = T with full-rank contrast matrices."""

    a_matrix: np.ndarray
    c_matrix: np.ndarray
    t_matrix: np.ndarray

    def __post_init__(self):
        self.a_matrix = np.atleast_2d(np.asarray(self.a_matrix, dtype=float))
        self.c_matrix = np.atleast_2d(np.asarray(self.c_matrix, dtype=float))
        self.t_matrix = np.atleast_2d(np.asarray(self.t_matrix, dtype=float))
        a, c = self.n_rows, self.n_cols
        if self.t_matrix.shape != (a, c):
            raise ShapeMismatch(f"target must be {a}x{c}, got {self.t_matrix.shape}")
        for name, mat, rank in (("A", self.a_matrix, a), ("C", self.c_matrix, c)):
            svals = np.linalg.svd(mat, compute_uv=False)
            if svals[-1] < EIG_GAP_RTOL * max(svals[0], 1e-300):
                raise RankDeficient(f"contrast {name} is rank deficient")
            if min(mat.shape) != rank:
                raise ShapeMismatch(f"contrast {name} has too many rows/columns")

    @property
    def n_rows(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.c_matrix.shape[1]

    def validate_against(self, f: int, p: int):
        a, c = self.n_rows, self.n_cols
        if self.a_matrix.shape != (a, p):
            raise ShapeMismatch(f"A must be a x p = {a}x{p}")
        if self.c_matrix.shape != (f, c):
            raise ShapeMismatch(f"C must be f x c = {f}x{c}")
        if a > p or c > f:
            raise ShapeMismatch("need a <= p and c <= f")


@dataclass
class MglhResult:
    hlt: float
    pbt: float
    wilks: float
    roy: float
    h_matrix: np.ndarray
    e_matrix: np.ndarray
    n_obs: int
    variances: dict[str, float] | None = None
    z_scores: dict[str, float] | None = None
    note: str = ""

    def as_dict(self) -> dict[str, float]:
        return {"hlt": self.hlt, "pbt": self.pbt, "wilks": self.wilks, "roy": self.roy}


def regression_blocks(tm: AugmentedMoment, f: int | None = None):
    """(feature gram, coefficient, residual covariance) from a conditional moment."""
    if tm.layout is not MomentLayout.CONDITIONAL:
        raise ShapeMismatch("need a conditional-layout moment matrix")
    f = tm.f_dim if f is None else f
    theta = tm.theta
    sig_f = theta[:f, :f]
    try:
        bhat = np.linalg.solve(sig_f, theta[:f, f:]).T
    except np.linalg.LinAlgError as exc:
        raise SingularTheta("feature gram is singular") from exc
    sigma = theta[f:, f:] - bhat @ sig_f @ bhat.T
    return sig_f, bhat, 0.5 * (sigma + sigma.T)


def mglh_he(tm: AugmentedMoment, spec: MglhSpec) -> tuple[np.ndarray, np.ndarray]:
    """Model variance H and error variance E of the hypothesis."""
    sig_f, bhat, sigma = regression_blocks(tm)
    spec.validate_against(sig_f.shape[0], sigma.shape[0])
    a, c, t = spec.a_matrix, spec.c_matrix, spec.t_matrix
    resid = a @ bhat @ c - t
    cquad = c.T @ np.linalg.solve(sig_f, c)
    try:
        h = resid @ np.linalg.solve(cquad, resid.T)
    except np.linalg.LinAlgError as exc:
        raise SingularCquad("C' inv(feature gram) C is singular") from exc
    e = a @ sigma @ a.T
    return 0.5 * (h + h.T), 0.5 * (e + e.T)


def _border(spec: MglhSpec, f: int) -> np.ndarray:
    """The (f+p) x (f+a) augmentation pairing features with contrasted assets."""
    return block_diag(np.eye(f), spec.a_matrix.T)


def _stack(spec: MglhSpec) -> np.ndarray:
    return np.vstack([spec.c_matrix, spec.t_matrix])


def mglh_g1g2(tm: AugmentedMoment, spec: MglhSpec) -> tuple[np.ndarray, np.ndarray]:
    """The two c-by-c factors whose product carries the hypothesis eigenvalues.

    G1 inverts the contrasted feature gram; G2 sandwiches the inverse of
    the bordered moment matrix between the stacked contrast and target.
    """
    sig_f, _, sigma = regression_blocks(tm)
    f, p = sig_f.shape[0], sigma.shape[0]
    spec.validate_against(f, p)
    c = spec.c_matrix
    cquad = c.T @ np.linalg.solve(sig_f, c)
    try:
        g1 = np.linalg.inv(cquad)
    except np.linalg.LinAlgError as exc:
        raise SingularCquad("C' inv(feature gram) C is singular") from exc
    mt = _border(spec, f)
    core = mt.T @ tm.theta @ mt
    try:
        core_inv = np.linalg.inv(core)
    except np.linalg.LinAlgError as exc:
        raise SingularTheta("bordered moment is singular") from exc
    s = _stack(spec)
    g2 = s.T @ core_inv @ s
    return 0.5 * (g1 + g1.T), 0.5 * (g2 + g2.T)


def _g1g2_eigen(g1: np.ndarray, g2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and right eigenvectors of the product G1 G2.

    Solved as the symmetric-definite pencil G2 v = lambda inv(G1) v, so
    the eigenvalues come out real.
    """
    g1_inv = np.linalg.inv(g1)
    vals, vecs = eigh(g2, 0.5 * (g1_inv + g1_inv.T))
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def mglh_statistics(tm: AugmentedMoment, spec: MglhSpec) -> MglhResult:
    """Point values of the four hypothesis statistics."""
    g1, g2 = mglh_g1g2(tm, spec)
    h, e = mglh_he(tm, spec)
    a, c = spec.n_rows, spec.n_cols
    vals, _ = _g1g2_eigen(g1, g2)
    hlt = float(np.sum(vals)) - c
    pbt = float(np.sum(1.0 / vals)) + a - c
    wilks = float(np.prod(1.0 / vals))
    roy = float(vals[0]) - 1.0
    return MglhResult(hlt, pbt, wilks, roy, h, e, tm.n_obs)


def mglh_derivatives(tm: AugmentedMoment, spec: MglhSpec) -> dict[str, np.ndarray]:
    """Gradient rows of the four statistics with respect to vech(theta).

    Assembled from the quadratic-form inverse rule; the largest-root
    gradient pairs left and right eigenvectors of the (non-symmetric)
    product, which finite differences confirm.
    """
    sig_f, _, sigma = regression_blocks(tm)
    f, p = sig_f.shape[0], sigma.shape[0]
    spec.validate_against(f, p)
    d = tm.dim
    theta = tm.theta
    c = spec.c_matrix
    mt = _border(spec, f)
    s = _stack(spec)
    g1, g2 = mglh_g1g2(tm, spec)

    # Jacobians over vec(theta)
    lead = np.zeros((d, f))
    lead[:f, :f] = np.eye(f)
    d_sigf_inv = d_qform_inv(lead.T, theta)                    # vec(inv gram)
    d_g1 = d_qform_inv(c.T, np.linalg.inv(sig_f)) @ d_sigf_inv
    core = mt.T @ theta @ mt
    d_core_inv = d_qform_inv(mt.T, theta)                      # vec(inv bordered)
    d_g2 = kron(s.T, s.T) @ d_core_inv
    d_g1_inv = kron(c.T, c.T) @ d_sigf_inv
    core_inv = np.linalg.inv(core)
    d_g2_inv = d_qform_inv(s.T, 0.5 * (core_inv + core_inv.T)) @ d_core_inv

    vec_of = lambda m: m.reshape(-1, order="F")
    q_hlt = vec_of(g1) @ d_g2 + vec_of(g2) @ d_g1
    g1_inv = np.linalg.inv(g1)
    g2_inv = np.linalg.inv(g2)
    q_pbt = vec_of(g1_inv) @ d_g2_inv + vec_of(g2_inv) @ d_g1_inv
    # det((G1 G2)^-1) falls as det(G1 G2) grows; the scalar case
    # d(1/xy)/dx = -1/(x^2 y) fixes the sign
    det_g1g2 = np.linalg.det(g1) * np.linalg.det(g2)
    q_wilks = -(vec_of(g1_inv) @ d_g1 + vec_of(g2_inv) @ d_g2) / det_g1g2

    vals, vecs = _g1g2_eigen(g1, g2)
    if len(vals) > 1 and vals[0] - vals[1] < EIG_GAP_RTOL * max(abs(vals[0]), 1e-300):
        raise RepeatedEigenvalue("leading root of the product is not simple")
    v = vecs[:, 0]
    u = g1_inv @ v                      # left eigenvector of G1 G2
    d_prod = kron(np.eye(spec.n_cols), g1) @ d_g2 + kron(g2.T, np.eye(spec.n_cols)) @ d_g1
    q_roy = (kron(v, u) @ d_prod) / float(u @ v)

    du = duplication_matrix(d).data
    return {
        "hlt": q_hlt @ du,
        "pbt": q_pbt @ du,
        "wilks": q_wilks @ du,
        "roy": q_roy @ du,
    }


def mglh_asymptotic(tm: AugmentedMoment, spec: MglhSpec, om: OmegaEstimate) -> MglhResult:
    """Statistics with normal-approximation variances and z-scores.

    z-scores are taken against the no-effect values (0, a, 1, 0). The
    limit law is a straight delta-method normal; the statistics behave
    more like chi-square variates in small samples, so the scores are
    flagged as approximations.
    """
    _check_dims(tm, om)
    result = mglh_statistics(tm, spec)
    grads = mglh_derivatives(tm, spec)
    variances = {k: float(q @ om.omega @ q) for k, q in grads.items()}
    nulls = {"hlt": 0.0, "pbt": float(spec.n_rows), "wilks": 1.0, "roy": 0.0}
    z = {}
    for k in STAT_NAMES:
        se = np.sqrt(variances[k] / tm.n_obs) if variances[k] > 0 else np.inf
        z[k] = (result.as_dict()[k] - nulls[k]) / se if np.isfinite(se) and se > 0 else 0.0
    result.variances = variances
    result.z_scores = z
    result.note = "normal-approximation z-scores; finite-sample laws are chi-square-like"
    return result


def mglh_distribution(tm: AugmentedMoment, spec: MglhSpec, om: OmegaEstimate) -> DistributionResult:
    """The four statistics as one point with a diagonal-free joint covariance."""
    result = mglh_statistics(tm, spec)
    grads = mglh_derivatives(tm, spec)
    q = np.vstack([grads[k] for k in STAT_NAMES])
    cov = q @ om.omega @ q.T
    point = np.array([result.as_dict()[k] for k in STAT_NAMES])
    return DistributionResult(point, cov, tm.n_obs, labels=list(STAT_NAMES))
