"""Experiment configuration: JSON schema, validation, budget resolution.

A single JSON document drives every CLI command.  Budgets default from
the problem size (dimension d and accuracy epsilon):

    k       = ceil(4 d^2/eps^2 max(1, ln d))   target samples
    m_disc  = ceil(4 d^2/eps^2)                inner steps per outer step
    m_gen   = ceil(0.25 d^2/eps^4)             outer steps
    beta    = sqrt(2 R / (L B m_gen)),  R = 10, L = 10, B = 10 d^2
    mu      = 0.05

Every default is overridable from the document.  Targets may be given
explicitly, as the identity, or drawn reproducibly as a random SPD
matrix at a prescribed closeness.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import linalg
from .activations import ActivationSpec
from .errors import ConfigError
from .model import RELU_DIM_WARN, TargetSpec
from .rng import RngStream
from .training import TrainSettings

CLOSENESS_CEILING = 2.0
DEFAULT_C_K = 4.0
DEFAULT_C_DISC = 4.0
DEFAULT_C_GEN = 0.25
MIN_CLOSENESS = 0.1


def default_budgets(dim: int, epsilon: float) -> dict[str, int]:
    base = dim * dim / (epsilon * epsilon)
    return {
        "k": math.ceil(DEFAULT_C_K * base * max(1.0, math.log(dim))),
        "m_disc": math.ceil(DEFAULT_C_DISC * base),
        "m_gen": math.ceil(DEFAULT_C_GEN * base / (epsilon * epsilon)),
    }


def random_spd_target(
    closeness: float, dim: int, rng: RngStream, slack: float = 0.9
) -> np.ndarray:
    """Random SPD matrix hitting the closeness bound with 10% slack.

    Draws a random symmetric unit-Frobenius direction D and scales I + s D
    so that max(||S - I||_F, ||S^-1 - I||_F) equals slack * closeness; the
    scale is found by bisection (the deviation is monotone in s on the
    positive definite range).
    """
    G = rng.normal_matrix(dim)
    D = linalg.symmetrize(G)
    D /= linalg.frobenius(D)
    lam, _ = linalg.sym_eig(D)
    s_max = 0.95 / abs(lam[0]) if lam[0] < 0.0 else 1e6
    target_dev = slack * closeness

    def deviation(s: float) -> float:
        S = np.eye(dim) + s * D
        return max(
            linalg.frobenius(S - np.eye(dim)),
            linalg.frobenius(np.linalg.inv(S) - np.eye(dim)),
        )

    lo, hi = 0.0, min(s_max, target_dev)
    if deviation(hi) < target_dev:
        hi = min(s_max, 10.0 * target_dev)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if deviation(mid) < target_dev:
            lo = mid
        else:
            hi = mid
    return np.eye(dim) + 0.5 * (lo + hi) * D


@dataclass
class ExperimentConfig:
    """Validated view of one experiment JSON document."""

    dim: int
    epsilon: float
    seeds: list[int]
    activation: dict[str, Any] = field(default_factory=lambda: {"kind": "sigmoid"})
    sigma_star: dict[str, Any] = field(default_factory=lambda: {"kind": "identity"})
    closeness_c: float | None = None
    k: int | None = None
    m_disc: int | None = None
    m_gen: int | None = None
    mu: float | None = None
    beta: float | None = None
    range_r: float = 10.0
    smooth_l: float = 10.0
    moment_b: float | None = None
    gen_batch: int = 1
    averaging: bool = True
    warm_start_disc: bool = False
    precondition: bool = False
    init_disc_scale: float = 0.0
    metrics_every: int = 1
    fosp_samples: int = 1000
    sweep: dict[str, list] = field(default_factory=dict)

    KNOWN_KEYS = {
        "dim", "epsilon", "seeds", "activation", "sigma_star", "closeness_c",
        "k", "m_disc", "m_gen", "mu", "beta", "range_r", "smooth_l", "moment_b",
        "gen_batch", "averaging", "warm_start_disc", "precondition", "init_disc_scale",
        "metrics_every", "fosp_samples", "sweep",
    }

    def __post_init__(self):
        if not isinstance(self.dim, int) or not 1 <= self.dim <= linalg.MAX_DIM:
            raise ConfigError(f"dim must be an integer in [1, {linalg.MAX_DIM}]")
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in (0, 1]")
        if not self.seeds or not all(isinstance(s, int) and s >= 0 for s in self.seeds):
            raise ConfigError("seeds must be a nonempty list of non-negative integers")
        kind = self.activation.get("kind")
        if kind not in ("relu", "sigmoid", "identity_box"):
            raise ConfigError(f"unknown activation kind {kind!r}")
        if kind == "relu" and self.dim > RELU_DIM_WARN:
            raise ConfigError(
                f"relu experiments are capped at d <= {RELU_DIM_WARN}: the invertible "
                f"region's mass decays like 2^-d and the discriminator starves"
            )
        if kind == "identity_box":
            try:
                ActivationSpec.identity_box(self.activation["lo"], self.activation["hi"])
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"invalid box bounds: {exc}") from exc
        star_kind = self.sigma_star.get("kind")
        if star_kind not in ("identity", "explicit", "random_spd"):
            raise ConfigError(f"unknown sigma_star kind {star_kind!r}")
        if star_kind == "explicit" and "matrix" not in self.sigma_star:
            raise ConfigError("explicit sigma_star requires a matrix")
        if star_kind == "random_spd" and "closeness" not in self.sigma_star:
            raise ConfigError("random_spd sigma_star requires a closeness")
        if self.closeness_c is not None and self.closeness_c > CLOSENESS_CEILING:
            raise ConfigError(
                f"closeness {self.closeness_c} exceeds the ceiling {CLOSENESS_CEILING}; "
                "far targets push samples out of the invertible region and gradients vanish"
            )
        for name in ("k", "m_disc", "m_gen"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 0):
                raise ConfigError(f"{name} must be a non-negative integer")
        if self.mu is not None and self.mu <= 0.0:
            raise ConfigError("mu must be positive")
        if self.metrics_every < 1 or self.fosp_samples < 1000 or self.gen_batch < 1:
            raise ConfigError("invalid metric or batch settings")

    # -- serialization ------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        unknown = set(data) - cls.KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        required = {"dim", "epsilon", "seeds"}
        missing = required - set(data)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = open(path).read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return cls.from_json(text)

    def to_dict(self) -> dict:
        out = {}
        for key in sorted(self.KNOWN_KEYS):
            out[key] = getattr(self, key)
        return out

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()

    # -- resolution ---------------------------------------------------------

    def build_activation(self) -> ActivationSpec:
        kind = self.activation["kind"]
        if kind == "identity_box":
            return ActivationSpec.identity_box(self.activation["lo"], self.activation["hi"])
        return ActivationSpec(kind, self.dim)

    def build_target(self, seed: int) -> TargetSpec:
        """Target for one run seed; random targets derive from the seed."""
        activation = self.build_activation()
        kind = self.sigma_star["kind"]
        if kind == "identity":
            S = np.eye(self.dim)
        elif kind == "explicit":
            S = np.array(self.sigma_star["matrix"], dtype=float)
            if S.shape != (self.dim, self.dim):
                raise ConfigError("explicit sigma_star has the wrong shape")
        else:
            closeness = float(self.sigma_star["closeness"])
            target_seed = int(self.sigma_star.get("seed", seed))
            S = random_spd_target(closeness, self.dim, RngStream(target_seed, stream_id=7))
        c = self.closeness_c
        if c is None:
            dev = max(
                linalg.frobenius(S - np.eye(self.dim)),
                linalg.frobenius(np.linalg.inv(S) - np.eye(self.dim)),
            )
            c = max(float(dev) * 1.05, MIN_CLOSENESS)
        if c > CLOSENESS_CEILING:
            raise ConfigError(
                f"target closeness {c:.3g} exceeds the ceiling {CLOSENESS_CEILING}"
            )
        try:
            return TargetSpec(S, activation, c)
        except (ValueError, linalg.NotPositiveDefinite) as exc:
            raise ConfigError(f"invalid target: {exc}") from exc

    def resolved_budgets(self) -> dict[str, int]:
        budgets = default_budgets(self.dim, self.epsilon)
        if self.k is not None:
            budgets["k"] = self.k
        if self.m_disc is not None:
            budgets["m_disc"] = self.m_disc
        if self.m_gen is not None:
            budgets["m_gen"] = self.m_gen
        return budgets

    def resolved_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        moment = self.moment_b if self.moment_b is not None else 10.0 * self.dim * self.dim
        m_gen = max(self.resolved_budgets()["m_gen"], 1)
        return math.sqrt(2.0 * self.range_r / (self.smooth_l * moment * m_gen))

    def settings_for(self, seed: int, checkpoint_every: int = 0, checkpoint_dir=None) -> TrainSettings:
        budgets = self.resolved_budgets()
        return TrainSettings(
            seed=seed,
            epsilon=self.epsilon,
            k=max(budgets["k"], 1),
            m_disc=max(budgets["m_disc"], 1),
            m_gen=budgets["m_gen"],
            mu=self.mu,
            beta=self.beta,
            range_r=self.range_r,
            smooth_l=self.smooth_l,
            moment_b=self.moment_b,
            gen_batch=self.gen_batch,
            averaging=self.averaging,
            warm_start_disc=self.warm_start_disc,
            precondition=self.precondition,
            init_disc_scale=self.init_disc_scale,
            metrics_every=self.metrics_every,
            fosp_samples=self.fosp_samples,
            checkpoint_every=checkpoint_every,
            checkpoint_dir=str(checkpoint_dir) if checkpoint_dir else None,
        )
