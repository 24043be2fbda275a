"""Generic projected SGD driver tolerant of bounded gradient bias.

Runs for a uniformly random number of steps and returns the final
iterate; for smooth objectives with bounded-second-moment oracles the
returned point is an approximate stationary point with high probability
over the stopping time, even when the oracle's expectation deviates
boundedly from the true gradient.  The outer generator loop is an
instance of this driver; it is also exposed generically for testing
against analytic objectives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .rng import RngStream


@dataclass(frozen=True)
class BpsgdSchedule:
    """Iteration budget and step size; step defaults to sqrt(2R/(L B M))."""

    iterations: int
    step: float | None = None
    range_r: float = 10.0
    smooth_l: float = 10.0
    moment_b: float = 10.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def resolved_step(self) -> float:
        if self.step is not None:
            if self.step <= 0.0:
                raise ValueError("step must be positive")
            return self.step
        return math.sqrt(2.0 * self.range_r / (self.smooth_l * self.moment_b * self.iterations))


def biased_projected_sgd(
    grad_oracle: Callable[[np.ndarray, RngStream], np.ndarray],
    project: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    sched: BpsgdSchedule,
    rng: RngStream,
) -> tuple[np.ndarray, int]:
    """Project x - beta * oracle(x) for a uniformly random number of steps.

    Returns (final iterate, stopping index m).  The oracle receives the
    driver's stream and may draw from it; the caller guarantees bounded
    bias and second moment.
    """
    beta = sched.resolved_step()
    m = int(rng.integers(1, sched.iterations))
    x = np.array(x0, dtype=float, copy=True)
    for _ in range(m):
        g = np.asarray(grad_oracle(x, rng), dtype=float)
        x = np.asarray(project(x - beta * g), dtype=float)
    return x, m
