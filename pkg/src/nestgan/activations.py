"""Coordinate-wise activations with an explicit invertible region.

Each activation comes with an open region T of pre-activation space on
which it is a bijection, plus the image S of T.  Membership tests are
strict (open sets): for relu the region is the open positive orthant, so
exact zeros on the boundary are treated as non-invertible.  The sigmoid
is globally invertible; float64 saturation means coordinates beyond
|x| ~ 36 round to {0, 1} and fall out of the open image, which is far
outside the range any Gaussian sampling here produces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutsideInvertibleRegion

KINDS = ("relu", "sigmoid", "identity_box")


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True, eq=False)
class ActivationSpec:
    """A transformation, its invertible region and the region's image."""

    kind: str
    dim: int
    lo: np.ndarray | None = field(default=None)
    hi: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == "identity_box":
            lo = np.asarray(self.lo, dtype=float)
            hi = np.asarray(self.hi, dtype=float)
            if lo.shape != (self.dim,) or hi.shape != (self.dim,):
                raise ValueError("box bounds must have shape (dim,)")
            if not np.all(lo < hi):
                raise ValueError("box requires lo < hi componentwise")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        elif self.lo is not None or self.hi is not None:
            raise ValueError("box bounds only apply to identity_box")

    # -- constructors -------------------------------------------------------

    @classmethod
    def relu(cls, dim: int) -> "ActivationSpec":
        return cls("relu", dim)

    @classmethod
    def sigmoid(cls, dim: int) -> "ActivationSpec":
        return cls("sigmoid", dim)

    @classmethod
    def identity_box(cls, lo, hi) -> "ActivationSpec":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        return cls("identity_box", lo.shape[0], lo, np.asarray(hi, dtype=float))

    # -- forward / inverse ----------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "sigmoid":
            return _stable_sigmoid(x)
        return x.copy()

    def inverse(self, y: np.ndarray) -> np.ndarray:
        """Inverse on the image of the region; raises outside it."""
        y = self._check(y)
        if not self.in_image(y):
            raise OutsideInvertibleRegion(f"point outside invertible image: {y}")
        if self.kind == "sigmoid":
            return np.log(y) - np.log1p(-y)
        return y.copy()

    # -- membership -----------------------------------------------------------

    def in_region(self, x: np.ndarray) -> bool:
        """Is the pre-activation x inside the open invertible region?"""
        return bool(self.region_mask(x[None, :])[0])

    def in_image(self, y: np.ndarray) -> bool:
        """Is the post-activation y inside the image of the region?"""
        return bool(self.image_mask(y[None, :])[0])

    def region_mask(self, X: np.ndarray) -> np.ndarray:
        """Vectorized in_region over rows of an (n, d) array."""
        X = np.asarray(X, dtype=float)
        if self.kind == "relu":
            return np.all(X > 0.0, axis=-1)
        if self.kind == "sigmoid":
            return np.ones(X.shape[:-1], dtype=bool)
        return np.all((X > self.lo) & (X < self.hi), axis=-1)

    def image_mask(self, Y: np.ndarray) -> np.ndarray:
        """Vectorized in_image over rows of an (n, d) array."""
        Y = np.asarray(Y, dtype=float)
        if self.kind == "relu":
            return np.all(Y > 0.0, axis=-1)
        if self.kind == "sigmoid":
            return np.all((Y > 0.0) & (Y < 1.0), axis=-1)
        return np.all((Y > self.lo) & (Y < self.hi), axis=-1)

    def inverse_rows(self, Y: np.ndarray) -> np.ndarray:
        """Row-wise inverse; caller guarantees every row is in the image."""
        Y = np.asarray(Y, dtype=float)
        if self.kind == "sigmoid":
            return np.log(Y) - np.log1p(-Y)
        return Y.copy()

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind == "identity_box":
            out["lo"] = self.lo.tolist()
            out["hi"] = self.hi.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ActivationSpec":
        if data["kind"] == "identity_box":
            return cls.identity_box(data["lo"], data["hi"])
        return cls(data["kind"], int(data["dim"]))

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"expected vector of dim {self.dim}, got shape {v.shape}")
        return v
