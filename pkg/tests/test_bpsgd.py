import math

import numpy as np
import pytest

from nestgan import BpsgdSchedule, RngStream, biased_projected_sgd


def ball_projection(radius):
    def project(x):
        nrm = np.linalg.norm(x)
        return x if nrm <= radius else x * (radius / nrm)

    return project


def test_zero_oracle_is_fixed_point():
    sched = BpsgdSchedule(iterations=50, step=0.5)
    x0 = np.array([1.0, -2.0, 3.0])
    out, m = biased_projected_sgd(lambda x, r: np.zeros_like(x), ball_projection(10.0), x0, sched, RngStream(1))
    np.testing.assert_allclose(out, x0)
    assert 1 <= m <= 50


def test_quadratic_contracts_with_high_probability():
    """f(x) = |x|^2 with exact gradient: each step multiplies by 0.8."""
    sched = BpsgdSchedule(iterations=4000, step=0.1)
    hits = 0
    for seed in range(20):
        out, m = biased_projected_sgd(
            lambda x, r: 2.0 * x, ball_projection(10.0), np.full(3, 5.0 / math.sqrt(3)), sched, RngStream(seed)
        )
        expected = 5.0 * 0.8**m
        assert np.linalg.norm(out) == pytest.approx(expected, rel=1e-9)
        if np.linalg.norm(out) <= 0.01:
            hits += 1
    assert hits >= 19  # fails only when m < 28, probability under 1%


def test_quartic_with_noisy_oracle_reaches_stationarity():
    """1-d double well: noisy unbiased oracle still lands near a critical point."""

    def grad(x):
        return 4.0 * x * (x * x - 1.0)

    sched = BpsgdSchedule(iterations=3000, step=0.01)
    good = 0
    for seed in range(100):
        rng = RngStream(seed, 5)

        def oracle(x, r):
            return grad(x) + 0.1 * r.standard_normal(1)

        x0 = np.array([1.8])
        out, _ = biased_projected_sgd(oracle, ball_projection(3.0), x0, sched, rng)
        if abs(grad(out)[0]) <= 0.1:
            good += 1
    assert good >= 90


def test_auto_step_formula():
    sched = BpsgdSchedule(iterations=400, range_r=10.0, smooth_l=10.0, moment_b=40.0)
    assert sched.resolved_step() == pytest.approx(math.sqrt(20.0 / (10.0 * 40.0 * 400)))


def test_stopping_index_uniform_and_replayable():
    sched = BpsgdSchedule(iterations=100, step=0.1)
    _, m1 = biased_projected_sgd(lambda x, r: x, ball_projection(1.0), np.zeros(1), sched, RngStream(3))
    _, m2 = biased_projected_sgd(lambda x, r: x, ball_projection(1.0), np.zeros(1), sched, RngStream(3))
    assert m1 == m2
    draws = [
        biased_projected_sgd(lambda x, r: np.zeros(1), ball_projection(1.0), np.zeros(1), sched, RngStream(seed))[1]
        for seed in range(300)
    ]
    assert min(draws) >= 1 and max(draws) <= 100
    assert np.mean(draws) == pytest.approx(50.5, abs=5.0)
