"""Quality metrics: closed-form distances and Monte Carlo diagnostics.

The training-quality headline is `surrogate_tv`, the Frobenius deviation
of the whitened generator covariance from identity; it upper-bounds the
total variation between the pre-activation Gaussians (and hence, by data
processing, between the transformed distributions).  The KL/Pinsker
route is reported alongside; the two bounds are not ordered pointwise,
but both vanish exactly when the covariances match.

Monte Carlo estimators report batch-means standard errors (20 batches by
default); statistical assertions downstream use 3-SE margins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import Singular
from .model import GeneratorParams, TargetSpec
from .rng import RngStream

DEFAULT_BATCHES = 20

CSV_COLUMNS = (
    "iteration",
    "surrogate_tv",
    "pinsker_tv",
    "fosp_residual",
    "disc_gap",
    "samples_used",
)


@dataclass(frozen=True)
class MetricRecord:
    """One row of per-iteration training metrics."""

    iteration: int
    surrogate_tv: float
    pinsker_tv: float
    fosp_residual: float
    disc_gap: float
    samples_used: int

    def __post_init__(self):
        values = (self.surrogate_tv, self.pinsker_tv, self.fosp_residual, self.disc_gap)
        if not all(np.isfinite(v) for v in values):
            raise ValueError("metric values must be finite")
        if self.surrogate_tv < 0.0 or self.pinsker_tv < 0.0:
            raise ValueError("distances must be non-negative")

    def to_csv_row(self) -> list[str]:
        return [
            repr(self.iteration),
            repr(self.surrogate_tv),
            repr(self.pinsker_tv),
            repr(self.fosp_residual),
            repr(self.disc_gap),
            repr(self.samples_used),
        ]


def _as_matrix(W) -> np.ndarray:
    return W.W if isinstance(W, GeneratorParams) else np.asarray(W, dtype=float)


def surrogate_tv(W, sigma_star: np.ndarray, inv_sqrt_sigma: np.ndarray | None = None) -> float:
    """|| sigma^-1/2 W W^T sigma^-1/2 - I ||_F."""
    Wm = _as_matrix(W)
    if inv_sqrt_sigma is None:
        inv_sqrt_sigma = linalg.spd_inv_sqrt(np.asarray(sigma_star, dtype=float))
    M = inv_sqrt_sigma @ (Wm @ Wm.T) @ inv_sqrt_sigma
    return linalg.frobenius(M - np.eye(Wm.shape[0]))


def gaussian_kl(W, sigma_star: np.ndarray, inv_sigma: np.ndarray | None = None) -> float:
    """KL( N(0, W W^T) || N(0, sigma_star) ), closed form."""
    Wm = _as_matrix(W)
    d = Wm.shape[0]
    if inv_sigma is None:
        inv_sigma = linalg.inverse(np.asarray(sigma_star, dtype=float))
    ratio = inv_sigma @ (Wm @ Wm.T)
    sign, log_det = np.linalg.slogdet(ratio)
    if sign <= 0.0 or not np.isfinite(log_det):
        raise Singular("covariance ratio is not positive definite")
    kl = 0.5 * (np.trace(ratio) - d - log_det)
    return float(max(kl, 0.0))


def pinsker_tv(W, sigma_star: np.ndarray, inv_sigma: np.ndarray | None = None) -> float:
    """sqrt(KL / 2), the Pinsker bound on total variation."""
    return float(np.sqrt(gaussian_kl(W, sigma_star, inv_sigma) / 2.0))


def _softplus(h: np.ndarray) -> np.ndarray:
    return np.maximum(h, 0.0) + np.log1p(np.exp(-np.abs(h)))


def _batch_se(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def virtual_criterion(
    W,
    target: TargetSpec,
    params=None,
    n: int = 10_000,
    rng: RngStream | None = None,
    batches: int = DEFAULT_BATCHES,
) -> tuple[float, float]:
    """Monte Carlo value of the two-player objective at (W, params).

    Estimates E_gen[log(1 - D)] + E_target[log D] with n samples per
    side; params defaults to the closed-form optimal discriminator, in
    which case this is the generator's effective objective.  Out-of-
    region samples contribute log(1/2) to either term.  Returns
    (estimate, batch-means standard error).
    """
    from .discriminator import optimal_discriminator

    if rng is None:
        raise ValueError("an RngStream is required")
    if n < 1000:
        raise ValueError("virtual criterion needs n >= 1000")
    Wm = _as_matrix(W)
    d = Wm.shape[0]
    if params is None:
        params = optimal_discriminator(Wm, target)
    act = target.activation
    log_half = np.log(0.5)

    gen_pre = rng.child(0).standard_normal((n, d)) @ Wm.T
    gen_mask = act.region_mask(gen_pre)
    h_gen = np.einsum("ni,ij,nj->n", gen_pre, params.A, gen_pre) + params.b
    gen_terms = np.where(gen_mask, -_softplus(h_gen), log_half)

    tgt_pre = rng.child(1).standard_normal((n, d)) @ target.sqrt_sigma.T
    tgt_mask = act.region_mask(tgt_pre)
    h_tgt = np.einsum("ni,ij,nj->n", tgt_pre, params.A, tgt_pre) + params.b
    tgt_terms = np.where(tgt_mask, -_softplus(-h_tgt), log_half)

    per_sample = gen_terms + tgt_terms
    estimate = float(np.mean(per_sample))
    batch_means = np.array([np.mean(chunk) for chunk in np.array_split(per_sample, batches)])
    return estimate, _batch_se(batch_means)


def _stationarity_factor(Wm: np.ndarray, inv_sigma: np.ndarray) -> np.ndarray:
    """sigma^-1 W - W^-T; vanishes exactly when W W^T = sigma."""
    W_inv = np.linalg.inv(Wm)
    if not np.all(np.isfinite(W_inv)):
        raise Singular("generator matrix is singular to working precision")
    return inv_sigma @ Wm - W_inv.T


def fosp_residual(
    W,
    target: TargetSpec,
    n: int = 2000,
    rng: RngStream | None = None,
    batches: int = DEFAULT_BATCHES,
    ps=None,
    boundary_tol: float = 1e-7,
    with_se: bool = True,
) -> tuple[float, float]:
    """Monte Carlo norm of the generator objective's gradient at W.

    The gradient factors as (sigma^-1 W - W^-T) times an in-region
    weighted second-moment matrix; the leading factor is computed in
    closed form and the second-moment Monte Carlo averaged over n
    latents.  When a projection-set description `ps` is supplied and W
    sits on its boundary, the one-sided stationarity measure along the
    inward direction toward the matched-covariance point is added.
    Returns (residual, batch-means standard error); with_se=False skips
    the batch pass and reports the error as 0 (per-iteration fast path).
    """
    if rng is None:
        raise ValueError("an RngStream is required")
    if n < 1000:
        raise ValueError("fosp residual needs n >= 1000")
    Wm = _as_matrix(W)
    d = Wm.shape[0]
    factor = _stationarity_factor(Wm, target.inv_sigma)

    Z = rng.standard_normal((n, d))
    pre = Z @ Wm.T
    mask = target.activation.region_mask(pre).astype(float)
    # quadratic score of the optimal discriminator at the generator's samples
    from .discriminator import optimal_ab

    A_opt, b_opt = optimal_ab(Wm, target.inv_sigma, target.half_log_det)
    h = np.einsum("ni,ij,nj->n", pre, A_opt, pre) + b_opt
    weights = mask / (1.0 + np.exp(-np.clip(h, -500.0, 500.0)))

    weighted = Z * weights[:, None]
    second_moment = (weighted.T @ Z) / n
    grad = factor @ second_moment
    residual = linalg.frobenius(grad)

    if with_se:
        batch_vals = []
        for idx in np.array_split(np.arange(n), batches):
            sm = (Z[idx].T * weights[idx]) @ Z[idx] / len(idx)
            batch_vals.append(linalg.frobenius(factor @ sm))
        se = _batch_se(np.asarray(batch_vals))
    else:
        se = 0.0

    if ps is not None:
        from .projections import generator_violation

        if abs(generator_violation(Wm, ps)) <= boundary_tol:
            U_svd, _, Vh = np.linalg.svd(Wm.T @ target.inv_sqrt_sigma)
            point = target.sqrt_sigma @ Vh.T @ U_svd.T
            gap = Wm - point
            gap_norm = linalg.frobenius(gap)
            if gap_norm > 1e-12:
                residual += max(0.0, float(np.sum(grad * gap)) / gap_norm)
    return residual, se


def fd_gradient_check(scalar_fn, analytic_grad: np.ndarray, point: np.ndarray, h: float = 1e-4) -> float:
    """Max relative error between analytic_grad and central differences.

    Perturbs each coordinate of `point` by +-h; the relative error at a
    coordinate is |fd - g| / max(|fd|, |g|, 1e-3 * scale, 1e-12) where
    scale is the largest gradient magnitude, so near-zero coordinates are
    judged against the gradient's overall scale rather than themselves.
    """
    if not 1e-7 <= h <= 1e-2:
        raise ValueError("h must lie in [1e-7, 1e-2]")
    point = np.asarray(point, dtype=float)
    grad = np.asarray(analytic_grad, dtype=float)
    if grad.shape != point.shape:
        raise ValueError("gradient and point shapes differ")
    flat_point = point.ravel()
    fd = np.zeros_like(flat_point)
    for i in range(flat_point.size):
        bump = np.zeros_like(flat_point)
        bump[i] = h
        f_plus = scalar_fn((flat_point + bump).reshape(point.shape))
        f_minus = scalar_fn((flat_point - bump).reshape(point.shape))
        fd[i] = (f_plus - f_minus) / (2.0 * h)
    g = grad.ravel()
    scale = max(np.abs(g).max(), np.abs(fd).max(), 1e-12)
    denom = np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-3 * scale)
    denom = np.maximum(denom, 1e-12)
    return float(np.max(np.abs(fd - g) / denom))
