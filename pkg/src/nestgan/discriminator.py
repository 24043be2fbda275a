"""Quadratic discriminator over the activation's invertible image.

On samples inside the image S of the invertible region the discriminator
inverts the activation and scores the pre-activation u with a sigmoid of
the quadratic form u^T A u + b; outside S it outputs exactly 1/2 (those
samples carry no usable likelihood-ratio information).  For a fixed
generator W the population-optimal parameters have the closed form
implemented by `optimal_discriminator`, which the gradient and Hessian
probes are tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .activations import ActivationSpec
from .model import GeneratorParams, TargetSpec
from .rng import RngStream

# Quadratic scores are clamped before exponentiation; the projection sets
# keep |score| far below this, so the clamp only guards debug excursions.
SCORE_CLAMP = 500.0


@dataclass(frozen=True, eq=False)
class DiscriminatorParams:
    """Symmetric quadratic coefficient A and scalar bias b."""

    A: np.ndarray
    b: float

    def __post_init__(self):
        A = linalg.symmetrize(linalg.check_matrix(self.A, "A"))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.A.shape[0]


def _as_matrix(W) -> np.ndarray:
    return W.W if isinstance(W, GeneratorParams) else np.asarray(W, dtype=float)


def quadratic_score(params: DiscriminatorParams, u: np.ndarray) -> float:
    """u^T A u + b for an already-inverted (pre-activation) vector u."""
    u = np.asarray(u, dtype=float)
    return float(u @ params.A @ u + params.b)


def discriminator_output(
    params: DiscriminatorParams, activation: ActivationSpec, x: np.ndarray
) -> float:
    """Probability the sample is real; exactly 0.5 outside the image."""
    x = np.asarray(x, dtype=float)
    if not activation.in_image(x):
        return 0.5
    u = activation.inverse(x)
    h = np.clip(quadratic_score(params, u), -SCORE_CLAMP, SCORE_CLAMP)
    return float(1.0 / (1.0 + np.exp(-h)))


def optimal_discriminator(W, target: TargetSpec) -> DiscriminatorParams:
    """Closed-form maximizer of the discriminator objective at fixed W.

    A = ((W W^T)^-1 - sigma_star^-1) / 2 and b matches the log ratio of
    the two Gaussian normalizing constants.
    """
    Wm = _as_matrix(W)
    A, b = optimal_ab(Wm, target.inv_sigma, target.half_log_det)
    return DiscriminatorParams(A, b)


def optimal_ab(Wm: np.ndarray, inv_sigma: np.ndarray, half_log_det: float) -> tuple[np.ndarray, float]:
    """optimal_discriminator on raw arrays with the target pieces precomputed."""
    WWt = Wm @ Wm.T
    sign, log_w = np.linalg.slogdet(Wm)
    if sign == 0.0 or not np.isfinite(log_w):
        raise linalg.Singular("generator matrix is singular to working precision")
    A = 0.5 * (np.linalg.inv(WWt) - inv_sigma)
    return linalg.symmetrize(A), float(log_w - half_log_det)


def two_sample_loss(
    params: DiscriminatorParams,
    activation: ActivationSpec,
    x_real: np.ndarray,
    y_fake: np.ndarray,
) -> float:
    """log D(x_real) + log(1 - D(y_fake)); the quantity one ascent step targets."""
    dr = discriminator_output(params, activation, x_real)
    df = discriminator_output(params, activation, y_fake)
    return float(np.log(dr) + np.log1p(-df))


def pair_gradient(
    params: DiscriminatorParams,
    activation: ActivationSpec,
    x_real: np.ndarray,
    y_fake: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Ascent gradient of the two-sample loss with respect to (A, b).

    The real sample contributes weight 1/(1 + e^k) on +(u u^T, 1) and the
    fake sample weight 1/(1 + e^-q) on -(v v^T, 1), where k and q are the
    quadratic scores of the inverted samples; out-of-image samples
    contribute nothing.  The A component is symmetric by construction.
    """
    d = params.dim
    grad_A = np.zeros((d, d))
    grad_b = 0.0
    x_real = np.asarray(x_real, dtype=float)
    y_fake = np.asarray(y_fake, dtype=float)
    if activation.in_image(x_real):
        u = activation.inverse(x_real)
        k = np.clip(quadratic_score(params, u), -SCORE_CLAMP, SCORE_CLAMP)
        w = 1.0 / (1.0 + np.exp(k))
        grad_A += w * np.outer(u, u)
        grad_b += w
    if activation.in_image(y_fake):
        v = activation.inverse(y_fake)
        q = np.clip(quadratic_score(params, v), -SCORE_CLAMP, SCORE_CLAMP)
        w = 1.0 / (1.0 + np.exp(-q))
        grad_A -= w * np.outer(v, v)
        grad_b -= w
    return grad_A, grad_b


def pre_activation_pair_gradient(
    A: np.ndarray,
    b: float,
    u: np.ndarray | None,
    v: np.ndarray | None,
) -> tuple[np.ndarray, float]:
    """pair_gradient on already-inverted samples (None = out of image)."""
    d = A.shape[0]
    grad_A = np.zeros((d, d))
    grad_b = 0.0
    if u is not None:
        k = float(np.clip(u @ A @ u + b, -SCORE_CLAMP, SCORE_CLAMP))
        w = 1.0 / (1.0 + np.exp(k))
        grad_A += w * np.outer(u, u)
        grad_b += w
    if v is not None:
        q = float(np.clip(v @ A @ v + b, -SCORE_CLAMP, SCORE_CLAMP))
        w = 1.0 / (1.0 + np.exp(-q))
        grad_A -= w * np.outer(v, v)
        grad_b -= w
    return grad_A, grad_b


# -- Monte Carlo curvature probe ------------------------------------------------


def _probe_features(pre: np.ndarray, A: np.ndarray, b: float, mask: np.ndarray):
    """Per-sample feature rows (vec(x x^T), 1) and curvature weights."""
    n, d = pre.shape
    scores = np.einsum("ni,ij,nj->n", pre, A, pre) + b
    scores = np.clip(scores, -SCORE_CLAMP, SCORE_CLAMP)
    sig = 1.0 / (1.0 + np.exp(-scores))
    weights = sig * (1.0 - sig) * mask
    feats = np.empty((n, d * d + 1))
    feats[:, : d * d] = (pre[:, :, None] * pre[:, None, :]).reshape(n, d * d)
    feats[:, d * d] = 1.0
    return feats, weights


def hessian_probe(
    params: DiscriminatorParams,
    activation: ActivationSpec,
    W,
    target: TargetSpec,
    n: int,
    rng: RngStream,
    batches: int = 0,
):
    """Monte Carlo Hessian of the discriminator objective in (A, b).

    Averages -f''(score) (vec(x x^T), 1) outer itself over n pre-activation
    samples from each of the generator and target Gaussians, restricted to
    the invertible region.  Symmetric and (on the projection sets) negative
    definite; used as a concavity probe, not in training.  Materializing
    the (d^2+1)^2 matrix is restricted to d <= 6; probe directions with
    hessian_quadratic_form beyond that.

    With batches > 0 also returns per-batch estimates for standard errors.
    """
    if n < 1000:
        raise ValueError("hessian probe needs n >= 1000")
    d = params.dim
    if d > 6:
        raise ValueError("full Hessian materialization limited to d <= 6")
    Wm = _as_matrix(W)
    rows = []
    for factor, stream in ((Wm.T, rng.child(0)), (target.sqrt_sigma.T, rng.child(1))):
        pre = stream.standard_normal((n, d)) @ factor
        mask = activation.region_mask(pre).astype(float)
        feats, weights = _probe_features(pre, params.A, params.b, mask)
        rows.append((feats, weights))
    dim_h = d * d + 1
    H = np.zeros((dim_h, dim_h))
    for feats, weights in rows:
        H -= (feats.T * weights) @ feats / n
    H = linalg.symmetrize(H)
    if not batches:
        return H
    batch_hs = []
    idx_splits = np.array_split(np.arange(n), batches)
    for idx in idx_splits:
        Hb = np.zeros((dim_h, dim_h))
        for feats, weights in rows:
            Hb -= (feats[idx].T * weights[idx]) @ feats[idx] / len(idx)
        batch_hs.append(linalg.symmetrize(Hb))
    return H, batch_hs


def symmetric_subspace_basis(d: int) -> np.ndarray:
    """Orthonormal basis of (symmetric A, b) inside the flat (d^2+1) space.

    The quadratic form only senses the symmetric part of A, so the full
    Hessian is exactly flat along antisymmetric directions; concavity
    statements live on this subspace.
    """
    cols = []
    for i in range(d):
        E = np.zeros((d, d))
        E[i, i] = 1.0
        cols.append(np.concatenate([E.ravel(), [0.0]]))
    for i in range(d):
        for j in range(i + 1, d):
            E = np.zeros((d, d))
            E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
            cols.append(np.concatenate([E.ravel(), [0.0]]))
    bias = np.zeros(d * d + 1)
    bias[-1] = 1.0
    cols.append(bias)
    return np.stack(cols, axis=1)


def symmetric_subspace_max_eigenvalue(H: np.ndarray, d: int) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of H restricted to the symmetric-(A, b) subspace.

    Returns the eigenvalue and the corresponding direction expressed in
    the flat (d^2+1) coordinates.
    """
    B = symmetric_subspace_basis(d)
    lam, Q = linalg.sym_eig(B.T @ H @ B)
    return float(lam[-1]), B @ Q[:, -1]


def hessian_quadratic_form(
    params: DiscriminatorParams,
    activation: ActivationSpec,
    W,
    target: TargetSpec,
    direction_A: np.ndarray,
    direction_b: float,
    n: int,
    rng: RngStream,
) -> float:
    """z^T H z for one (A, b) direction without materializing H."""
    d = params.dim
    Wm = _as_matrix(W)
    total = 0.0
    z = np.concatenate([np.asarray(direction_A, dtype=float).ravel(), [direction_b]])
    for factor, stream in ((Wm.T, rng.child(0)), (target.sqrt_sigma.T, rng.child(1))):
        pre = stream.standard_normal((n, d)) @ factor
        mask = activation.region_mask(pre).astype(float)
        feats, weights = _probe_features(pre, params.A, params.b, mask)
        proj = feats @ z
        total -= float(np.sum(weights * proj * proj)) / n
    return total
