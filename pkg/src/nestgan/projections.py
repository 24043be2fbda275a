"""Convex constraint sets for both players and their Euclidean projections.

The generator set is an intersection of a Frobenius ball around the
identity with an eigenvalue box on the symmetric part; it keeps the
invertible region's mass bounded away from zero so gradients never
vanish.  The discriminator set is a Frobenius ball for A plus a bias
interval, sized so that the closed-form optimal discriminator of every
in-set generator is itself in-set (checked numerically by
`verify_containment`).  Discriminator projection is separable and exact;
the generator projection uses Dykstra's alternating scheme, which
converges to the exact projection onto the intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .discriminator import DiscriminatorParams, optimal_discriminator
from .errors import ConvergenceFailure
from .model import GeneratorParams, TargetSpec
from .rng import RngStream

DYKSTRA_MAX_ROUNDS = 500
DYKSTRA_TOL = 1e-10
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class ProjectionSets:
    """Numeric radii instantiating both constraint sets from closeness c."""

    gen_radius: float  # Frobenius radius of the generator ball around I
    sym_lo: float  # lower bound on x^T W x over unit x
    sym_hi: float  # upper bound on x^T W x over unit x
    disc_radius: float  # Frobenius radius for A
    bias_bound: float  # bound on |b|
    closeness: float
    dim: int

    def __post_init__(self):
        if not (0.0 < self.sym_lo < 1.0 < self.sym_hi):
            raise ValueError("need 0 < sym_lo < 1 < sym_hi")
        if min(self.gen_radius, self.disc_radius, self.bias_bound) <= 0.0:
            raise ValueError("radii must be positive")

    @classmethod
    def from_closeness(cls, c: float, dim: int) -> "ProjectionSets":
        """Radii sized so both optima sit inside their sets with slack.

        The generator radii follow the closeness bound directly (target
        square root has eigenvalues in [1/(1+c), 1+c] and is within c of
        the identity in Frobenius norm).  The discriminator radii scale
        like (1+c)^4 (the optimum is a difference of inverse covariances
        whose Frobenius norm is dimension-free over the generator set)
        with a 30% cushion on top, which `verify_containment` checks
        numerically against sampled generators; oversizing them is not
        free, since the early large steps of the 2/(mu t) schedule
        pinball inside this ball before the averaging window settles.
        """
        if c <= 0.0:
            raise ValueError("closeness must be positive")
        gen_radius = 3.0 * c + c * c
        sym_lo = 1.0 / (2.0 * (1.0 + c) ** 2)
        sym_hi = 2.0 * (1.0 + c) ** 2
        disc_radius = 2.6 * (1.0 + c) ** 4
        bias_bound = 1.3 * (2.0 * dim * math.log(1.0 + c) + 1.0)
        return cls(gen_radius, sym_lo, sym_hi, disc_radius, bias_bound, c, dim)


# -- discriminator side -------------------------------------------------------


def project_discriminator(A: np.ndarray, b: float, ps: ProjectionSets) -> DiscriminatorParams:
    """Exact projection: radial scaling of A plus clamping of b."""
    A = linalg.symmetrize(np.asarray(A, dtype=float))
    nrm = linalg.frobenius(A)
    if nrm > ps.disc_radius:
        A = A * (ps.disc_radius / nrm)
    b = float(np.clip(b, -ps.bias_bound, ps.bias_bound))
    return DiscriminatorParams(A, b)


def in_discriminator_set(params: DiscriminatorParams, ps: ProjectionSets, tol: float = FEASIBILITY_TOL) -> bool:
    return (
        linalg.frobenius(params.A) <= ps.disc_radius + tol
        and abs(params.b) <= ps.bias_bound + tol
    )


# -- generator side -----------------------------------------------------------


def _project_ball(W: np.ndarray, radius: float) -> np.ndarray:
    eye = np.eye(W.shape[0])
    dev = W - eye
    nrm = linalg.frobenius(dev)
    if nrm <= radius:
        return W
    return eye + dev * (radius / nrm)


def _project_eig_box(W: np.ndarray, lo: float, hi: float) -> np.ndarray:
    sym = linalg.symmetrize(W)
    skew = W - sym
    lam, Q = linalg.sym_eig(sym)
    if lam[0] >= lo and lam[-1] <= hi:
        return W
    lam = np.clip(lam, lo, hi)
    return (Q * lam) @ Q.T + skew


def generator_violation(W: np.ndarray, ps: ProjectionSets) -> float:
    """Worst constraint violation; <= 0 means W is inside the set."""
    ball = linalg.frobenius(W - np.eye(W.shape[0])) - ps.gen_radius
    lam, _ = linalg.sym_eig(linalg.symmetrize(W))
    return max(ball, ps.sym_lo - lam[0], lam[-1] - ps.sym_hi)


def in_generator_set(W: np.ndarray, ps: ProjectionSets, tol: float = FEASIBILITY_TOL) -> bool:
    return generator_violation(np.asarray(W, dtype=float), ps) <= tol


def project_generator_matrix(W: np.ndarray, ps: ProjectionSets) -> np.ndarray:
    """Euclidean projection onto the generator set (raw matrix).

    Dykstra's alternating projections between the Frobenius ball and the
    eigenvalue box; each single-set projection is exact, and when the
    single-set projection of an input already satisfies the other
    constraint it is returned directly (it is then optimal for the
    intersection as well).
    """
    W = np.asarray(W, dtype=float)
    if in_generator_set(W, ps, tol=0.0):
        return W.copy()
    cand = _project_ball(W, ps.gen_radius)
    if generator_violation(cand, ps) <= 0.0:
        return cand
    cand = _project_eig_box(W, ps.sym_lo, ps.sym_hi)
    if generator_violation(cand, ps) <= 0.0:
        return cand

    x = W.copy()
    p = np.zeros_like(W)
    q = np.zeros_like(W)
    for _ in range(DYKSTRA_MAX_ROUNDS):
        y = _project_ball(x + p, ps.gen_radius)
        p = x + p - y
        x_new = _project_eig_box(y + q, ps.sym_lo, ps.sym_hi)
        q = y + q - x_new
        step = linalg.frobenius(x_new - x)
        x = x_new
        if step <= DYKSTRA_TOL * (1.0 + linalg.frobenius(x)) and generator_violation(x, ps) <= FEASIBILITY_TOL:
            return x
    raise ConvergenceFailure("alternating projection failed to stabilize in 500 rounds")


def project_generator(W: np.ndarray, ps: ProjectionSets) -> GeneratorParams:
    return GeneratorParams(project_generator_matrix(W, ps))


def sample_generator_point(ps: ProjectionSets, rng: RngStream, spread: float = 1.0) -> np.ndarray:
    """Random in-set generator matrix: radial perturbation of I, projected."""
    d = ps.dim
    G = rng.normal_matrix(d)
    G /= max(linalg.frobenius(G), 1e-12)
    radius = ps.gen_radius * spread * rng.uniform()
    return project_generator_matrix(np.eye(d) + radius * G, ps)


def verify_containment(
    ps: ProjectionSets, target: TargetSpec, n: int, rng: RngStream
) -> None:
    """Assert the square-root target and n random optima are in-set.

    Raises ValueError when containment fails; called by the test-mode
    constructors and the check suite.
    """
    if not in_generator_set(target.sqrt_sigma, ps):
        raise ValueError("square-root target escapes the generator set")
    for i in range(n):
        W = sample_generator_point(ps, rng.child(i))
        opt = optimal_discriminator(W, target)
        if not in_discriminator_set(opt, ps):
            raise ValueError(
                f"optimal discriminator escapes its set at a sampled generator point "
                f"(|A|_F={linalg.frobenius(opt.A):.4g}, |b|={abs(opt.b):.4g})"
            )
