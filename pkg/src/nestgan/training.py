"""Nested descent-ascent training of the one-layer generator.

Outer loop over the generator weights W: each iteration re-trains the
discriminator from scratch by inner-loop SGA against the k cached target
samples, then takes one projected stochastic descent step on W using the
gradient of log(1 - D(activation(W z))) at a fresh latent z.  The
returned iterate is the one at a uniformly random stopping index, the
stopping rule under which the biased-oracle analysis guarantees an
approximate stationary point; the report still logs every iteration so
the trajectory can be examined offline.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .activations import ActivationSpec
from .discriminator import DiscriminatorParams, optimal_discriminator
from .errors import ConvergenceFailure, NotPositiveDefinite, Singular
from .metrics import MetricRecord, fosp_residual, pinsker_tv, surrogate_tv
from .model import (
    GeneratorParams,
    TargetSpec,
    estimate_region_mass,
    sample_target,
    whitening_transform,
)
from .projections import ProjectionSets, project_generator_matrix
from .rng import RngStream
from .sga import SgaSchedule, invert_real_samples, sga_discriminator_pre

SCORE_CLAMP = 500.0


def generator_gradient(
    W: np.ndarray, A: np.ndarray, b: float, z: np.ndarray, activation: ActivationSpec
) -> np.ndarray:
    """Gradient with respect to W of log(1 - D(activation(W z); A, b)).

    Zero whenever W z leaves the invertible region (the discriminator is
    flat there); otherwise -2 sigma(h) (A W z) z^T with h the quadratic
    score of the pre-activation.
    """
    u = W @ z
    if not activation.in_region(u):
        return np.zeros_like(W)
    h = float(np.clip(u @ A @ u + b, -SCORE_CLAMP, SCORE_CLAMP))
    sig = 1.0 / (1.0 + math.exp(-h))
    return -2.0 * sig * np.outer(A @ u, z)


def generator_loss(
    W: np.ndarray, A: np.ndarray, b: float, Z: np.ndarray, activation: ActivationSpec
) -> float:
    """Mean of log(1 - D(activation(W z); A, b)) over latent rows Z."""
    pre = Z @ W.T
    mask = activation.region_mask(pre)
    h = np.einsum("ni,ij,nj->n", pre, A, pre) + b
    h = np.clip(h, -SCORE_CLAMP, SCORE_CLAMP)
    softplus = np.maximum(h, 0.0) + np.log1p(np.exp(-np.abs(h)))
    terms = np.where(mask, -softplus, np.log(0.5))
    return float(np.mean(terms))


@dataclass(frozen=True)
class TrainSettings:
    """Resolved per-run budgets and knobs for nested training."""

    seed: int
    epsilon: float
    k: int
    m_disc: int
    m_gen: int
    mu: float | None = None  # None = mass-scaled default, see resolve_mu
    beta: float | None = None
    range_r: float = 10.0
    smooth_l: float = 10.0
    moment_b: float | None = None  # defaults to 10 d^2 at resolve time
    gen_batch: int = 1
    averaging: bool = True
    warm_start_disc: bool = False
    precondition: bool = False
    init_disc_scale: float = 0.0  # 0 = start inner loop at the set's center
    metrics_every: int = 1
    fosp_samples: int = 1000
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.m_disc < 1:
            raise ValueError("m_disc must be >= 1")
        if self.m_gen < 0:
            raise ValueError("m_gen must be >= 0")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must be in (0, 1]")
        if self.mu is not None and self.mu <= 0.0:
            raise ValueError("mu must be positive")
        if self.gen_batch < 1 or self.metrics_every < 1:
            raise ValueError("invalid schedule parameters")

    def resolved_beta(self, dim: int) -> float:
        if self.beta is not None:
            return self.beta
        moment = self.moment_b if self.moment_b is not None else 10.0 * dim * dim
        return math.sqrt(2.0 * self.range_r / (self.smooth_l * moment * max(self.m_gen, 1)))


BASE_MU = 0.05
MU_MASS_NUMERATOR = 0.9


def resolve_mu(mu: float | None, target: TargetSpec, rng: RngStream) -> float:
    """Schedule constant for the inner loop; mass-rescaled under truncation.

    Truncation gates the per-step gradient signal by the invertible
    region's mass, and with the inner iterate starting at the set's
    center (near the optimum) the noise-dominated regime favors smaller
    steps; the default divides the step scale by the estimated mass.
    Fully invertible activations keep the base constant and draw nothing
    from the stream.
    """
    if mu is not None:
        return mu
    if target.activation.kind == "sigmoid":
        return BASE_MU
    mass, _ = estimate_region_mass(target.sqrt_sigma, target.activation, 10_000, rng)
    if mass >= 0.95:
        return BASE_MU
    return max(BASE_MU, MU_MASS_NUMERATOR / max(mass, 0.01))


@dataclass
class TrainReport:
    """Per-run metrics and accounting for reproducibility."""

    seed: int
    stop_index: int
    outer_iterations: int
    records: list[MetricRecord] = field(default_factory=list)
    final_surrogate_tv: float = math.nan
    final_fosp_residual: float = math.nan
    wall_time: float = 0.0
    mu_used: float = math.nan
    target_samples: int = 0
    train_latents: int = 0
    metric_latents: int = 0
    precondition_fraction: float | None = None

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "stop_index": self.stop_index,
            "outer_iterations": self.outer_iterations,
            "final_surrogate_tv": self.final_surrogate_tv,
            "final_fosp_residual": self.final_fosp_residual,
            "wall_time": self.wall_time,
            "mu_used": self.mu_used,
            "target_samples": self.target_samples,
            "train_latents": self.train_latents,
            "metric_latents": self.metric_latents,
            "precondition_fraction": self.precondition_fraction,
        }


def _write_checkpoint(
    path: Path, iteration: int, W: np.ndarray, disc: DiscriminatorParams,
    rng: RngStream, record: MetricRecord,
) -> None:
    payload = {
        "iteration": iteration,
        "W": W.flatten().tolist(),
        "A": disc.A.flatten().tolist(),
        "b": disc.b,
        "rng_state": rng.state(),
        "metrics": {
            "surrogate_tv": record.surrogate_tv,
            "pinsker_tv": record.pinsker_tv,
            "fosp_residual": record.fosp_residual,
            "disc_gap": record.disc_gap,
            "samples_used": record.samples_used,
        },
    }
    path.write_text(json.dumps(payload))


def nested_sgda(target: TargetSpec, settings: TrainSettings) -> tuple[GeneratorParams, TrainReport]:
    """Run nested descent-ascent against a known target specification.

    Draws the k target samples once up front, then alternates full inner
    discriminator training with single projected generator steps.  All
    randomness flows from the settings seed through three fixed streams
    (target sampling / training / metrics), so reruns are bitwise
    reproducible and changing the metric cadence never perturbs the
    training path.
    """
    start = time.perf_counter()
    d = target.dim
    act = target.activation
    ps = ProjectionSets.from_closeness(target.closeness_c, d)
    beta = settings.resolved_beta(d)

    root = RngStream(settings.seed)
    target_rng = root.child(0)
    train_rng = root.child(1)
    metric_rng = root.child(2)
    mu = resolve_mu(settings.mu, target, root.child(3))
    sched = SgaSchedule(mu, settings.m_disc, settings.averaging)

    report = TrainReport(settings.seed, 0, settings.m_gen)
    report.mu_used = mu
    real = sample_target(target, target_rng, settings.k)
    real_pre, real_mask = invert_real_samples(act, real)
    report.target_samples = settings.k

    W = np.eye(d)
    if settings.precondition:
        M, whitening = whitening_transform(real, act)
        report.precondition_fraction = whitening.fraction_in_region
        W = project_generator_matrix(linalg.inverse(M), ps)

    if settings.m_gen == 0:
        report.final_surrogate_tv = surrogate_tv(W, target.sigma_star, target.inv_sqrt_sigma)
        report.final_fosp_residual = 0.0
        report.wall_time = time.perf_counter() - start
        return GeneratorParams(W), report

    m_stop = int(train_rng.integers(1, settings.m_gen))
    report.stop_index = m_stop
    W_out = W.copy()
    checkpoint_dir = Path(settings.checkpoint_dir) if settings.checkpoint_dir else None
    if checkpoint_dir is not None:
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    disc = DiscriminatorParams(np.zeros((d, d)), 0.0)
    for it in range(1, settings.m_gen + 1):
        try:
            init = None
            if settings.init_disc_scale > 0.0:
                init = DiscriminatorParams(
                    settings.init_disc_scale * train_rng.normal_matrix(d),
                    settings.init_disc_scale * float(train_rng.standard_normal(1)[0]),
                )
            elif settings.warm_start_disc and it > 1:
                init = disc
            disc = sga_discriminator_pre(
                W, act, real_pre, real_mask, ps, sched, train_rng.child(it), init=init
            )
            W_before = W
            Zb = train_rng.standard_normal((settings.gen_batch, d))
            grad = np.zeros((d, d))
            for z in Zb:
                grad += generator_gradient(W, disc.A, disc.b, z, act)
            grad /= settings.gen_batch
            W = project_generator_matrix(W - beta * grad, ps)
        except (Singular, NotPositiveDefinite, ConvergenceFailure) as exc:
            raise type(exc)(f"optimize stage failed at outer iteration {it}: {exc}") from exc

        report.train_latents += settings.m_disc + settings.gen_batch
        if it == m_stop:
            W_out = W.copy()

        record = None
        if it % settings.metrics_every == 0 or it == settings.m_gen:
            record = _metric_record(
                it, W, W_before, disc, target, settings, metric_rng.child(it), report
            )
            report.records.append(record)
        if (
            checkpoint_dir is not None
            and settings.checkpoint_every > 0
            and it % settings.checkpoint_every == 0
        ):
            if record is None:
                record = _metric_record(
                    it, W, W_before, disc, target, settings, metric_rng.child(it), report
                )
            _write_checkpoint(
                checkpoint_dir / f"checkpoint_{it:06d}.json", it, W, disc, train_rng, record
            )

    report.final_surrogate_tv = surrogate_tv(W_out, target.sigma_star, target.inv_sqrt_sigma)
    final_fosp, _ = fosp_residual(
        W_out, target, n=settings.fosp_samples, rng=metric_rng.child(0), ps=ps
    )
    report.metric_latents += settings.fosp_samples
    report.final_fosp_residual = final_fosp
    report.wall_time = time.perf_counter() - start
    return GeneratorParams(W_out), report


def _metric_record(
    iteration: int,
    W: np.ndarray,
    W_inner: np.ndarray,
    disc: DiscriminatorParams,
    target: TargetSpec,
    settings: TrainSettings,
    rng: RngStream,
    report: TrainReport,
) -> MetricRecord:
    from .discriminator import optimal_ab

    stv = surrogate_tv(W, target.sigma_star, target.inv_sqrt_sigma)
    ptv = pinsker_tv(W, target.sigma_star, target.inv_sigma)
    fosp, _ = fosp_residual(W, target, n=settings.fosp_samples, rng=rng, with_se=False)
    report.metric_latents += settings.fosp_samples
    A_opt, b_opt = optimal_ab(W_inner, target.inv_sigma, target.half_log_det)
    gap = linalg.frobenius(disc.A - A_opt) + abs(disc.b - b_opt)
    samples_used = report.target_samples + report.train_latents
    return MetricRecord(iteration, stv, ptv, fosp, gap, samples_used)
