import numpy as np
import pytest
import scipy.stats

from nestgan import (
    ActivationSpec,
    GeneratorParams,
    InsufficientInRegionSamples,
    RngStream,
    TargetSpec,
    estimate_region_mass,
    sample_p,
    sample_target,
    whitening_transform,
)


def test_generator_params_reject_singular():
    with pytest.raises(ValueError):
        GeneratorParams(np.zeros((2, 2)))


def test_sample_matches_forward_of_linear_map():
    act = ActivationSpec.relu(2)
    rng = RngStream(5, 1)
    out, z = sample_p(np.eye(2), act, rng, 3, return_latents=True)
    replay = RngStream(5, 1).standard_normal((3, 2))
    assert np.all(z == replay)
    for i in range(3):
        np.testing.assert_allclose(out[i], np.maximum(z[i], 0.0))


def test_box_sample_is_linear_map():
    act = ActivationSpec.identity_box([-1.0, -1.0], [1.0, 1.0])
    W = np.diag([2.0, 1.0])
    rng = RngStream(8, 0)
    out, z = sample_p(W, act, rng, 1, return_latents=True)
    np.testing.assert_allclose(out[0], W @ z[0])


def test_relu_identity_example():
    act = ActivationSpec.relu(2)
    z = np.array([1.0, -1.0])
    np.testing.assert_allclose(act.forward(np.eye(2) @ z), [1.0, 0.0])


def test_region_mass_orthant():
    act = ActivationSpec.relu(2)
    est, se = estimate_region_mass(np.eye(2), act, 100_000, RngStream(1))
    assert se <= 1.0 / (2.0 * np.sqrt(100_000))
    assert abs(est - 0.25) <= 3.0 * se


def test_region_mass_sigmoid_is_one():
    act = ActivationSpec.sigmoid(3)
    est, se = estimate_region_mass(np.eye(3), act, 1000, RngStream(2))
    assert est == 1.0 and se == 0.0


def test_region_mass_box_matches_cdf_oracle():
    act = ActivationSpec.identity_box([-1.0, -1.0], [1.0, 1.0])
    est, se = estimate_region_mass(np.eye(2), act, 200_000, RngStream(3))
    want = (scipy.stats.norm.cdf(1.0) - scipy.stats.norm.cdf(-1.0)) ** 2
    assert abs(est - want) <= 3.0 * se


def test_latent_covariance_sanity():
    rng = RngStream(4)
    _, z = sample_p(np.eye(3), ActivationSpec.sigmoid(3), rng, 100_000, return_latents=True)
    cov = z.T @ z / len(z)
    assert np.linalg.norm(cov - np.eye(3)) <= 0.05


def test_whitening_on_identity_target():
    act = ActivationSpec.sigmoid(2)
    target = TargetSpec(np.eye(2), act, 0.2)
    samples = sample_target(target, RngStream(6), 50_000)
    M, report = whitening_transform(samples, act)
    assert report.fraction_in_region == 1.0
    assert np.linalg.norm(M - np.eye(2)) <= 0.1


def test_whitening_box_target():
    act = ActivationSpec.identity_box([-1.0, -1.0], [1.0, 1.0])
    target = TargetSpec(np.diag([1.2, 0.9]), act, 0.45)
    samples = sample_target(target, RngStream(7), 100_000)
    M, report = whitening_transform(samples, act)
    assert 0.0 < report.fraction_in_region < 1.0
    # fresh in-region samples re-expressed through M have near-identity covariance
    fresh = sample_target(target, RngStream(8), 100_000)
    mask = act.image_mask(fresh)
    pre = act.inverse_rows(fresh[mask]) @ M.T
    cov = pre.T @ pre / mask.sum()
    assert np.linalg.norm(cov - np.eye(2)) <= 0.05


def test_whitening_needs_in_region_samples():
    act = ActivationSpec.identity_box([-1.0, -1.0], [1.0, 1.0])
    far = np.full((100, 2), 5.0)
    with pytest.raises(InsufficientInRegionSamples):
        whitening_transform(far, act)


def test_target_spec_validates_closeness():
    act = ActivationSpec.sigmoid(2)
    with pytest.raises(ValueError):
        TargetSpec(np.diag([4.0, 1.0]), act, 0.5)


def test_target_spec_json_roundtrip():
    act = ActivationSpec.identity_box([-1.0, -2.0], [1.0, 2.0])
    target = TargetSpec(np.diag([1.2, 0.9]), act, 0.5)
    again = TargetSpec.from_json(target.to_json())
    np.testing.assert_allclose(again.sigma_star, target.sigma_star)
    assert again.activation.to_dict() == act.to_dict()
    assert again.closeness_c == 0.5
