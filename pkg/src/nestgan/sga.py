"""Inner loop: stochastic gradient ascent for the discriminator.

At a fixed generator the discriminator objective is strongly concave on
its constraint set, so projected SGA with the 2/(mu (t+1)) step schedule
and linearly-growing averaging weights converges at the fast 1/T rate.
The per-step arithmetic lives in a numba kernel (tens of millions of
steps per training run); `sga_discriminator_reference` is the plain
numpy twin used by the tests to validate the kernel step by step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .activations import ActivationSpec
from .discriminator import DiscriminatorParams, pre_activation_pair_gradient
from .model import GeneratorParams, TargetSpec, sample_target
from .projections import ProjectionSets, project_discriminator
from .rng import RngStream

SCORE_CLAMP = 500.0


@dataclass(frozen=True)
class SgaSchedule:
    """Step schedule 2 / (mu (t+1)) with optional weighted averaging."""

    mu: float
    iterations: int
    averaging: bool = True

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError("mu must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@njit(cache=True)
def _sga_kernel(A0, b0, U, real_in, perm, V, fake_in, mu, r_a, r_b):  # pragma: no cover
    d = A0.shape[0]
    M = V.shape[0]
    k_real = U.shape[0]
    A = A0.copy()
    b = b0
    sum_A = np.zeros((d, d))
    sum_b = 0.0
    for t in range(M):
        i = perm[t % k_real]
        w_real = 0.0
        if real_in[i]:
            k = b
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += A[r, c] * U[i, c]
                k += U[i, r] * s
            if k > SCORE_CLAMP:
                k = SCORE_CLAMP
            elif k < -SCORE_CLAMP:
                k = -SCORE_CLAMP
            w_real = 1.0 / (1.0 + math.exp(k))
        w_fake = 0.0
        if fake_in[t]:
            q = b
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += A[r, c] * V[t, c]
                q += V[t, r] * s
            if q > SCORE_CLAMP:
                q = SCORE_CLAMP
            elif q < -SCORE_CLAMP:
                q = -SCORE_CLAMP
            w_fake = 1.0 / (1.0 + math.exp(-q))
        eta = 2.0 / (mu * (t + 2.0))
        for r in range(d):
            for c in range(d):
                upd = 0.0
                if real_in[i]:
                    upd += w_real * U[i, r] * U[i, c]
                if fake_in[t]:
                    upd -= w_fake * V[t, r] * V[t, c]
                A[r, c] += eta * upd
        b += eta * (w_real - w_fake)
        nrm = 0.0
        for r in range(d):
            for c in range(d):
                nrm += A[r, c] * A[r, c]
        nrm = math.sqrt(nrm)
        if nrm > r_a:
            scale = r_a / nrm
            for r in range(d):
                for c in range(d):
                    A[r, c] *= scale
        if b > r_b:
            b = r_b
        elif b < -r_b:
            b = -r_b
        weight = t + 1.0
        for r in range(d):
            for c in range(d):
                sum_A[r, c] += weight * A[r, c]
        sum_b += weight * b
    total = M * (M + 1.0) / 2.0
    return sum_A / total, sum_b / total, A, b


def invert_real_samples(
    activation: ActivationSpec, real_samples: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Pre-activation rows and in-image mask for the cached target samples.

    Computed once per training run; the cached samples never change across
    outer iterations.
    """
    real_samples = np.asarray(real_samples, dtype=float)
    real_mask = activation.image_mask(real_samples)
    U = np.zeros_like(real_samples)
    if np.any(real_mask):
        U[real_mask] = activation.inverse_rows(real_samples[real_mask])
    return U, real_mask


def _prepare_inner_inputs(
    W: np.ndarray,
    activation: ActivationSpec,
    real_samples: np.ndarray,
    iterations: int,
    rng: RngStream,
):
    """Invert the cached real samples and pre-draw all fake pre-activations."""
    U, real_mask = invert_real_samples(activation, real_samples)
    Z = rng.standard_normal((iterations, W.shape[0]))
    V = Z @ W.T
    fake_mask = activation.region_mask(V)
    perm = rng.permutation(real_samples.shape[0]).astype(np.int64)
    return U, real_mask, perm, V, fake_mask


def sga_discriminator(
    W: np.ndarray | GeneratorParams,
    target: TargetSpec,
    real_samples: np.ndarray,
    ps: ProjectionSets,
    sched: SgaSchedule,
    rng: RngStream,
    init: DiscriminatorParams | None = None,
) -> DiscriminatorParams:
    """Train the discriminator against a fixed generator.

    Cycles the cached real samples in a seeded permutation, draws one
    fresh generator sample per step, ascends with the pair gradient and
    projects every step.  Returns the weighted-average iterate when the
    schedule asks for averaging, else the last iterate.
    """
    Wm = W.W if isinstance(W, GeneratorParams) else np.asarray(W, dtype=float)
    if len(real_samples) == 0:
        raise ValueError("real_samples must be nonempty")
    U, real_mask = invert_real_samples(target.activation, real_samples)
    return sga_discriminator_pre(Wm, target.activation, U, real_mask, ps, sched, rng, init)


def sga_discriminator_pre(
    Wm: np.ndarray,
    activation: ActivationSpec,
    U: np.ndarray,
    real_mask: np.ndarray,
    ps: ProjectionSets,
    sched: SgaSchedule,
    rng: RngStream,
    init: DiscriminatorParams | None = None,
) -> DiscriminatorParams:
    """sga_discriminator on already-inverted real samples (training hot path)."""
    d = Wm.shape[0]
    A0 = np.zeros((d, d)) if init is None else init.A.copy()
    b0 = 0.0 if init is None else float(init.b)
    Z = rng.standard_normal((sched.iterations, d))
    V = Z @ Wm.T
    fake_mask = activation.region_mask(V)
    perm = rng.permutation(U.shape[0]).astype(np.int64)
    avg_A, avg_b, last_A, last_b = _sga_kernel(
        A0, b0, U, real_mask, perm, V, fake_mask,
        sched.mu, ps.disc_radius, ps.bias_bound,
    )
    if sched.averaging:
        return DiscriminatorParams(avg_A, avg_b)
    return DiscriminatorParams(last_A, last_b)


def sga_discriminator_reference(
    W: np.ndarray | GeneratorParams,
    target: TargetSpec,
    real_samples: np.ndarray,
    ps: ProjectionSets,
    sched: SgaSchedule,
    rng: RngStream,
    init: DiscriminatorParams | None = None,
) -> DiscriminatorParams:
    """Plain-numpy twin of sga_discriminator; test oracle for the kernel."""
    Wm = W.W if isinstance(W, GeneratorParams) else np.asarray(W, dtype=float)
    d = Wm.shape[0]
    A = np.zeros((d, d)) if init is None else init.A.copy()
    b = 0.0 if init is None else float(init.b)
    U, real_mask, perm, V, fake_mask = _prepare_inner_inputs(
        Wm, target.activation, real_samples, sched.iterations, rng
    )
    k_real = len(real_samples)
    sum_A = np.zeros((d, d))
    sum_b = 0.0
    for t in range(sched.iterations):
        i = perm[t % k_real]
        u = U[i] if real_mask[i] else None
        v = V[t] if fake_mask[t] else None
        grad_A, grad_b = pre_activation_pair_gradient(A, b, u, v)
        eta = 2.0 / (sched.mu * (t + 2.0))
        proj = project_discriminator(A + eta * grad_A, b + eta * grad_b, ps)
        A, b = proj.A, proj.b
        sum_A += (t + 1.0) * A
        sum_b += (t + 1.0) * b
    if sched.averaging:
        total = sched.iterations * (sched.iterations + 1.0) / 2.0
        return DiscriminatorParams(sum_A / total, sum_b / total)
    return DiscriminatorParams(A, b)


def fresh_sample_schedule(
    target: TargetSpec, iterations: int, rng: RngStream
) -> np.ndarray:
    """Draw one fresh real sample per inner step (one-pass training mode)."""
    return sample_target(target, rng, iterations)
