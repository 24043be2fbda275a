import json
import math
from pathlib import Path

import numpy as np
import pytest

from nestgan import (
    ActivationSpec,
    ProjectionSets,
    RngStream,
    TargetSpec,
    TrainSettings,
    fd_gradient_check,
    generator_gradient,
    generator_loss,
    nested_sgda,
    optimal_discriminator,
    sample_generator_point,
    surrogate_tv,
    virtual_criterion,
)
from nestgan import linalg

SIG2 = ActivationSpec.sigmoid(2)


def small_settings(seed=0, **kw):
    base = dict(
        seed=seed, epsilon=0.5, k=50, m_disc=40, m_gen=30,
        fosp_samples=1000, metrics_every=1,
    )
    base.update(kw)
    return TrainSettings(**base)


def test_generator_gradient_matches_finite_differences(sigmoid_target_d3, proj_sets_d3):
    target = sigmoid_target_d3
    act = target.activation
    rng = RngStream(17)
    for i in range(5):
        stream = rng.child(i)
        W = sample_generator_point(proj_sets_d3, stream)
        params = optimal_discriminator(W, target)
        Z = stream.child(1).standard_normal((30, 3))
        grad = sum(generator_gradient(W, params.A, params.b, z, act) for z in Z) / len(Z)

        def loss_at(mat):
            return generator_loss(mat.reshape(3, 3), params.A, params.b, Z, act)

        assert fd_gradient_check(loss_at, grad, W, h=1e-5) <= 1e-6


def test_generator_gradient_zero_off_region():
    box = ActivationSpec.identity_box([-1.0, -1.0], [1.0, 1.0])
    grad = generator_gradient(np.eye(2), np.eye(2), 0.5, np.array([3.0, 3.0]), box)
    assert np.all(grad == 0.0)


def test_descent_step_decreases_criterion():
    """One exact-gradient step at the optimal discriminator lowers the objective."""
    target = TargetSpec(np.diag([1.5, 1.0]), SIG2, 0.55)
    ps = ProjectionSets.from_closeness(0.55, 2)
    rng = RngStream(23)
    n = 100_000
    wins = 0
    trials = 100
    for i in range(trials):
        stream = rng.child(i)
        W = sample_generator_point(ps, stream, spread=0.6)
        if surrogate_tv(W, target.sigma_star) < 0.05:
            wins += 1  # already at the optimum; nothing to decrease
            continue
        params = optimal_discriminator(W, target)
        Z = stream.child(1).standard_normal((n, 2))
        pre = Z @ W.T
        h = np.einsum("ni,ij,nj->n", pre, params.A, pre) + params.b
        sig = 1.0 / (1.0 + np.exp(-np.clip(h, -500, 500)))
        grad = -2.0 * (params.A @ pre.T * sig) @ Z / n
        step = 1e-3
        W_next = W - step * grad
        v_before, _ = virtual_criterion(W, target, n=50_000, rng=stream.child(2))
        v_after, _ = virtual_criterion(W_next, target, n=50_000, rng=stream.child(2))
        if v_after < v_before:
            wins += 1
    assert wins >= 95


def test_gradient_mean_lipschitz_in_discriminator(sigmoid_target_d3, proj_sets_d3):
    """Perturbing (A, b) moves the averaged oracle by a bounded multiple."""
    target = sigmoid_target_d3
    act = target.activation
    rng = RngStream(29)
    W = sample_generator_point(proj_sets_d3, rng)
    opt = optimal_discriminator(W, target)
    Z = rng.child(1).standard_normal((4000, 3))

    def mean_grad(A, b):
        total = np.zeros((3, 3))
        for z in Z:
            total += generator_gradient(W, A, b, z, act)
        return total / len(Z)

    base = mean_grad(opt.A, opt.b)
    ratios = []
    for i in range(100):
        stream = rng.child(100 + i)
        dA = 0.2 * stream.normal_matrix(3)
        dA = linalg.symmetrize(dA)
        db = 0.2 * float(stream.standard_normal(1)[0])
        dist = np.linalg.norm(dA) + abs(db)
        moved = mean_grad(opt.A + dA, opt.b + db)
        ratios.append(np.linalg.norm(moved - base) / dist)
    ratios = np.array(ratios)
    assert np.all(np.isfinite(ratios))
    assert ratios.max() <= 10.0 * np.median(ratios)


def test_second_moment_growth_is_quadratic_in_dimension():
    from nestgan.checks import check_second_moment_scaling

    result = check_second_moment_scaling(RngStream(31), 40_000)
    assert result.passed, result.detail


def test_zero_outer_iterations_returns_identity(sigmoid_target_d2):
    params, report = nested_sgda(sigmoid_target_d2, small_settings(m_gen=0))
    np.testing.assert_allclose(params.W, np.eye(2))
    assert report.records == []
    assert report.stop_index == 0


def test_training_is_reproducible(sigmoid_target_d2):
    _, r1 = nested_sgda(sigmoid_target_d2, small_settings(seed=5))
    _, r2 = nested_sgda(sigmoid_target_d2, small_settings(seed=5))
    assert len(r1.records) == len(r2.records)
    for a, b in zip(r1.records, r2.records):
        assert a == b
    assert r1.stop_index == r2.stop_index


def test_metric_cadence_does_not_change_path(sigmoid_target_d2):
    p1, r1 = nested_sgda(sigmoid_target_d2, small_settings(seed=6, metrics_every=1))
    p2, r2 = nested_sgda(sigmoid_target_d2, small_settings(seed=6, metrics_every=7))
    np.testing.assert_array_equal(p1.W, p2.W)
    by_iter = {rec.iteration: rec for rec in r1.records}
    for rec in r2.records:
        assert by_iter[rec.iteration] == rec


def test_report_accounting(sigmoid_target_d2):
    settings = small_settings(seed=7)
    _, report = nested_sgda(sigmoid_target_d2, settings)
    assert report.target_samples == settings.k
    assert report.train_latents == settings.m_gen * (settings.m_disc + settings.gen_batch)
    assert report.records[-1].iteration == settings.m_gen
    assert report.records[-1].samples_used == settings.k + report.train_latents
    assert 1 <= report.stop_index <= settings.m_gen
    assert math.isfinite(report.final_surrogate_tv)


def test_checkpoints_written(tmp_path, sigmoid_target_d2):
    settings = small_settings(
        seed=8, checkpoint_every=10, checkpoint_dir=str(tmp_path / "ck")
    )
    nested_sgda(sigmoid_target_d2, settings)
    files = sorted((tmp_path / "ck").glob("checkpoint_*.json"))
    assert len(files) == 3
    payload = json.loads(files[0].read_text())
    assert payload["iteration"] == 10
    assert len(payload["W"]) == 4
    assert len(payload["A"]) == 4
    assert isinstance(payload["b"], float)
    assert "counter" in payload["rng_state"]
    assert set(payload["metrics"]) == {
        "surrogate_tv", "pinsker_tv", "fosp_residual", "disc_gap", "samples_used",
    }


def test_preconditioned_start(sigmoid_target_d2):
    settings = small_settings(seed=9, k=5000, precondition=True, m_gen=1)
    _, report = nested_sgda(sigmoid_target_d2, settings)
    assert report.precondition_fraction == 1.0


def test_identity_recovery_smoke():
    """Tiny end-to-end run: identity target stays near the identity."""
    target = TargetSpec(np.eye(2), SIG2, 0.2)
    settings = TrainSettings(
        seed=3, epsilon=0.3, k=400, m_disc=200, m_gen=300, fosp_samples=1000,
        metrics_every=50,
    )
    params, report = nested_sgda(target, settings)
    assert report.final_surrogate_tv <= 0.5
