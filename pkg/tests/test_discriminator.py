import math

import numpy as np
import pytest

from nestgan import (
    ActivationSpec,
    DiscriminatorParams,
    RngStream,
    TargetSpec,
    discriminator_output,
    fd_gradient_check,
    hessian_probe,
    optimal_discriminator,
    pair_gradient,
    quadratic_score,
    sample_generator_point,
    sample_p,
    sample_target,
    two_sample_loss,
)
from nestgan import linalg
from nestgan.checks import _mean_pair_gradient

SIG2 = ActivationSpec.sigmoid(2)


def test_output_half_at_zero_params():
    params = DiscriminatorParams(np.zeros((2, 2)), 0.0)
    x = SIG2.forward(np.array([0.7, -0.3]))
    assert discriminator_output(params, SIG2, x) == 0.5


def test_output_half_off_image():
    box = ActivationSpec.identity_box([-1.0, -1.0], [1.0, 1.0])
    params = DiscriminatorParams(np.eye(2), 1.0)
    assert discriminator_output(params, box, np.array([3.0, 0.0])) == 0.5


def test_output_hand_value():
    params = DiscriminatorParams(np.diag([1.0, 0.0]), 0.0)
    x = SIG2.forward(np.array([1.0, 0.0]))
    want = 1.0 / (1.0 + math.exp(-1.0))
    assert discriminator_output(params, SIG2, x) == pytest.approx(want, rel=1e-12)


def test_output_in_unit_interval(rng):
    params = DiscriminatorParams(rng.normal_matrix(2), 0.5)
    for i in range(100):
        x = SIG2.forward(rng.standard_normal(2))
        val = discriminator_output(params, SIG2, x)
        assert 0.0 < val < 1.0


def test_quadratic_score_examples():
    assert quadratic_score(DiscriminatorParams(np.zeros((2, 2)), 3.0), np.array([9.0, -2.0])) == 3.0
    assert quadratic_score(DiscriminatorParams(np.eye(2), 0.0), np.array([1.0, 1.0])) == 2.0
    params = DiscriminatorParams(np.diag([3.0 / 8.0, 0.0]), -math.log(2.0))
    assert quadratic_score(params, np.array([2.0, 0.0])) == pytest.approx(1.5 - math.log(2.0), rel=1e-12)


def test_optimal_discriminator_matched():
    target = TargetSpec(np.eye(2), SIG2, 0.2)
    opt = optimal_discriminator(np.eye(2), target)
    np.testing.assert_allclose(opt.A, np.zeros((2, 2)), atol=1e-14)
    assert opt.b == pytest.approx(0.0, abs=1e-14)


def test_optimal_discriminator_closed_form():
    target = TargetSpec(np.diag([4.0, 1.0]), SIG2, 3.1)
    opt = optimal_discriminator(np.eye(2), target)
    np.testing.assert_allclose(opt.A, np.diag([3.0 / 8.0, 0.0]), atol=1e-14)
    assert opt.b == pytest.approx(-math.log(2.0), rel=1e-12)


def test_optimal_discriminator_matched_product():
    target = TargetSpec(np.diag([4.0, 1.0]), SIG2, 3.1)
    opt = optimal_discriminator(np.diag([2.0, 1.0]), target)
    np.testing.assert_allclose(opt.A, np.zeros((2, 2)), atol=1e-14)
    assert opt.b == pytest.approx(0.0, abs=1e-12)


def test_pair_gradient_off_image_is_zero():
    box = ActivationSpec.identity_box([-1.0, -1.0], [1.0, 1.0])
    params = DiscriminatorParams(np.eye(2), 0.3)
    grad_A, grad_b = pair_gradient(params, box, np.array([2.0, 2.0]), np.array([-3.0, 0.0]))
    assert np.all(grad_A == 0.0) and grad_b == 0.0


def test_pair_gradient_symmetric_cancellation():
    params = DiscriminatorParams(np.zeros((2, 2)), 0.0)
    x = SIG2.forward(np.array([0.4, -0.9]))
    grad_A, grad_b = pair_gradient(params, SIG2, x, x)
    np.testing.assert_allclose(grad_A, np.zeros((2, 2)), atol=1e-15)
    assert grad_b == pytest.approx(0.0, abs=1e-15)


def test_pair_gradient_matches_finite_differences():
    act = ActivationSpec.sigmoid(3)
    rng = RngStream(21)
    for i in range(5):
        stream = rng.child(i)
        params = DiscriminatorParams(0.4 * stream.normal_matrix(3), 0.2)
        x = act.forward(stream.standard_normal(3))
        y = act.forward(stream.standard_normal(3))
        grad_A, grad_b = pair_gradient(params, act, x, y)
        theta = np.concatenate([params.A.ravel(), [params.b]])

        def loss_at(vec):
            A = linalg.symmetrize(vec[:-1].reshape(3, 3))
            return two_sample_loss(DiscriminatorParams(A, float(vec[-1])), act, x, y)

        err = fd_gradient_check(loss_at, np.concatenate([grad_A.ravel(), [grad_b]]), theta, h=1e-5)
        assert err <= 1e-6


def test_mean_gradient_is_fd_gradient_of_mc_loss(sigmoid_target_d3, proj_sets_d3):
    """The averaged oracle equals the gradient of the averaged loss."""
    target = sigmoid_target_d3
    act = target.activation
    rng = RngStream(31)
    W = sample_generator_point(proj_sets_d3, rng)
    params = DiscriminatorParams(0.3 * rng.normal_matrix(3), -0.1)
    reals = sample_target(target, rng.child(1), 30)
    fakes = sample_p(W, act, rng.child(2), 30)
    mean_A = np.zeros((3, 3))
    mean_b = 0.0
    for x, y in zip(reals, fakes):
        gA, gb = pair_gradient(params, act, x, y)
        mean_A += gA / len(reals)
        mean_b += gb / len(reals)
    theta = np.concatenate([params.A.ravel(), [params.b]])

    def mc_loss(vec):
        A = linalg.symmetrize(vec[:-1].reshape(3, 3))
        p = DiscriminatorParams(A, float(vec[-1]))
        return float(np.mean([two_sample_loss(p, act, x, y) for x, y in zip(reals, fakes)]))

    err = fd_gradient_check(mc_loss, np.concatenate([mean_A.ravel(), [mean_b]]), theta, h=1e-5)
    assert err <= 1e-6


def test_optimum_is_stationary(sigmoid_target_d3, proj_sets_d3):
    target = sigmoid_target_d3
    rng = RngStream(41)
    n = 40_000
    for i in range(3):
        W = sample_generator_point(proj_sets_d3, rng.child(i))
        opt = optimal_discriminator(W, target)
        real_pre = rng.child(100 + i).standard_normal((n, 3)) @ target.sqrt_sigma.T
        fake_pre = rng.child(200 + i).standard_normal((n, 3)) @ W.T
        mean_vec, se = _mean_pair_gradient(opt, real_pre, fake_pre, target.activation)
        assert np.linalg.norm(mean_vec) <= 3.0 * se


def test_hessian_probe_negative_definite_at_center():
    from nestgan import symmetric_subspace_max_eigenvalue

    target = TargetSpec(np.eye(2), SIG2, 0.2)
    params = DiscriminatorParams(np.zeros((2, 2)), 0.0)
    H = hessian_probe(params, SIG2, np.eye(2), target, 10_000, RngStream(51))
    lam_max, _ = symmetric_subspace_max_eigenvalue(H, 2)
    assert lam_max < 0.0
    np.testing.assert_allclose(H, H.T)
    # the flat parametrization is exactly flat along antisymmetric directions
    anti = np.zeros(5)
    anti[1], anti[2] = 1.0, -1.0
    assert abs(anti @ H @ anti) <= 1e-14


def test_hessian_probe_se_shrinks_with_n():
    """Doubling the sample count shrinks the entry noise by about sqrt(2)."""
    target = TargetSpec(np.eye(2), SIG2, 0.2)
    params = DiscriminatorParams(0.2 * np.eye(2), 0.1)
    rng = RngStream(61)

    def entry_std(n, base):
        vals = [
            hessian_probe(params, SIG2, np.eye(2), target, n, rng.child(base + t))[0, 0]
            for t in range(12)
        ]
        return np.std(vals, ddof=1)

    s1 = entry_std(2000, 0)
    s2 = entry_std(8000, 100)
    ratio = s1 / s2  # expect about 2 for a 4x sample increase
    assert 1.3 <= ratio <= 3.0
