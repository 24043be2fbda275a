"""Generator model: weights, targets, sampling and whitening.

A generator is the pair (W, activation): latents z ~ N(0, I) map to
activation(W z).  The target distribution is the same construction with
an unknown weight matrix, represented here through its pre-activation
covariance `sigma_star` (only W W^T is identifiable, so the target is
stored as a covariance plus its symmetric square root).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .activations import ActivationSpec
from .errors import InsufficientInRegionSamples
from .rng import RngStream

# The invertible-region mass of relu decays like 2^-d, so experiments past
# this dimension starve the discriminator of in-region samples.
RELU_DIM_WARN = 8


@dataclass(frozen=True, eq=False)
class GeneratorParams:
    """Weight matrix of the generator's linear layer; must be invertible."""

    W: np.ndarray

    def __post_init__(self):
        W = linalg.check_matrix(self.W, "W")
        if linalg.condition_number(W) > 1e8:
            raise ValueError("generator matrix condition number exceeds 1e8")
        object.__setattr__(self, "W", W)

    @property
    def dim(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """Known-covariance description of the distribution to be learned.

    closeness_c bounds max(||sigma_star - I||_F, ||sigma_star^-1 - I||_F);
    construction validates the bound.
    """

    sigma_star: np.ndarray
    activation: ActivationSpec
    closeness_c: float
    sqrt_sigma: np.ndarray = field(init=False, repr=False)
    inv_sqrt_sigma: np.ndarray = field(init=False, repr=False)
    inv_sigma: np.ndarray = field(init=False, repr=False)
    half_log_det: float = field(init=False, repr=False)

    def __post_init__(self):
        S = linalg.symmetrize(linalg.check_matrix(self.sigma_star, "sigma_star"))
        d = S.shape[0]
        if self.activation.dim != d:
            raise ValueError("activation dim does not match sigma_star")
        lam, _ = linalg.sym_eig(S)
        if lam[0] <= 0.0:
            raise linalg.NotPositiveDefinite("sigma_star must be positive definite")
        dev = max(
            linalg.frobenius(S - np.eye(d)),
            linalg.frobenius(linalg.inverse(S) - np.eye(d)),
        )
        if dev > self.closeness_c + 1e-9:
            raise ValueError(
                f"sigma_star deviates from identity by {dev:.4g} > closeness_c={self.closeness_c}"
            )
        object.__setattr__(self, "sigma_star", S)
        object.__setattr__(self, "sqrt_sigma", linalg.spd_sqrt(S))
        object.__setattr__(self, "inv_sqrt_sigma", linalg.spd_inv_sqrt(S))
        object.__setattr__(self, "inv_sigma", linalg.inverse(S))
        object.__setattr__(self, "half_log_det", 0.5 * linalg.log_det(S)[0])

    @property
    def dim(self) -> int:
        return self.sigma_star.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "activation": self.activation.to_dict(),
                "sigma_star": self.sigma_star.flatten().tolist(),
                "closeness_c": self.closeness_c,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TargetSpec":
        data = json.loads(text)
        d = int(data["dim"])
        S = np.array(data["sigma_star"], dtype=float).reshape(d, d)
        return cls(S, ActivationSpec.from_dict(data["activation"]), float(data["closeness_c"]))


def sample_p(
    W: np.ndarray | GeneratorParams,
    activation: ActivationSpec,
    rng: RngStream,
    n: int = 1,
    return_latents: bool = False,
):
    """Draw n samples of activation(W z), z ~ N(0, I).

    With return_latents=True also returns the latent rows, which the
    generator's gradient oracle consumes directly (no inversion needed).
    """
    Wm = W.W if isinstance(W, GeneratorParams) else np.asarray(W, dtype=float)
    Z = rng.standard_normal((n, Wm.shape[0]))
    pre = Z @ Wm.T
    out = np.empty_like(pre)
    for i in range(n):
        out[i] = activation.forward(pre[i])
    if return_latents:
        return out, Z
    return out


def sample_target(target: TargetSpec, rng: RngStream, n: int) -> np.ndarray:
    """Draw n samples from the target distribution."""
    return sample_p(target.sqrt_sigma, target.activation, rng, n)


def estimate_region_mass(
    W: np.ndarray | GeneratorParams,
    activation: ActivationSpec,
    n: int,
    rng: RngStream,
) -> tuple[float, float]:
    """Monte Carlo mass of the invertible region under N(0, W W^T).

    Returns (estimate, standard_error); the Bernoulli standard error is
    at most 1 / (2 sqrt(n)).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    Wm = W.W if isinstance(W, GeneratorParams) else np.asarray(W, dtype=float)
    Z = rng.standard_normal((n, Wm.shape[0]))
    hits = activation.region_mask(Z @ Wm.T)
    p = float(np.mean(hits))
    se = float(np.sqrt(max(p * (1.0 - p), 0.0) / n))
    return p, se


@dataclass(frozen=True)
class WhiteningReport:
    n_total: int
    n_in_region: int
    fraction_in_region: float


def whitening_transform(
    samples: np.ndarray, activation: ActivationSpec
) -> tuple[np.ndarray, WhiteningReport]:
    """Whitening matrix M from the invertible-region portion of a sample.

    Inverts every sample that lands in the activation's image, forms the
    empirical second moment C of those pre-activations and returns
    M = C^-1/2, so the inverted in-region sample re-expressed through M
    has identity empirical covariance.  Used to initialize training near
    the target when the raw covariance is far from identity.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise ValueError("samples must be an (n, d) array")
    d = samples.shape[1]
    mask = activation.image_mask(samples)
    n_in = int(np.sum(mask))
    if n_in < d:
        raise InsufficientInRegionSamples(
            f"{n_in} in-region samples < dimension {d}; cannot whiten"
        )
    pre = activation.inverse_rows(samples[mask])
    second_moment = (pre.T @ pre) / n_in
    M = linalg.spd_inv_sqrt(second_moment)
    report = WhiteningReport(samples.shape[0], n_in, n_in / samples.shape[0])
    return M, report
