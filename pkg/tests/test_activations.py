import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nestgan import ActivationSpec, OutsideInvertibleRegion

BOX = ActivationSpec.identity_box([-1.0, -1.0], [1.0, 1.0])


def test_relu_forward():
    relu = ActivationSpec.relu(2)
    np.testing.assert_allclose(relu.forward(np.array([-1.0, 2.0])), [0.0, 2.0])


def test_sigmoid_forward_at_zero():
    sig = ActivationSpec.sigmoid(2)
    np.testing.assert_allclose(sig.forward(np.zeros(2)), [0.5, 0.5])


def test_box_forward_is_identity():
    np.testing.assert_allclose(BOX.forward(np.array([0.3, -0.2])), [0.3, -0.2])


def test_relu_inverse_on_positive_orthant():
    relu = ActivationSpec.relu(2)
    np.testing.assert_allclose(relu.inverse(np.array([1.0, 2.0])), [1.0, 2.0])


def test_sigmoid_inverse_at_half():
    sig = ActivationSpec.sigmoid(2)
    np.testing.assert_allclose(sig.inverse(np.array([0.5, 0.5])), [0.0, 0.0], atol=1e-15)


def test_relu_boundary_is_outside():
    relu = ActivationSpec.relu(2)
    with pytest.raises(OutsideInvertibleRegion):
        relu.inverse(np.array([0.0, 2.0]))


def test_membership_examples():
    relu = ActivationSpec.relu(2)
    sig = ActivationSpec.sigmoid(3)
    assert relu.in_region(np.array([1.0, 1.0]))
    assert not relu.in_region(np.array([1.0, -0.1]))
    assert sig.in_region(np.array([5.0, -7.0, 0.0]))


def test_box_requires_ordered_bounds():
    with pytest.raises(ValueError):
        ActivationSpec.identity_box([1.0, 0.0], [0.0, 1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-8.0, 8.0), min_size=3, max_size=3))
def test_round_trip_property(coords):
    x = np.array(coords)
    for spec in (ActivationSpec.relu(3), ActivationSpec.sigmoid(3),
                 ActivationSpec.identity_box([-2.0] * 3, [2.0] * 3)):
        if spec.in_region(x):
            back = spec.inverse(spec.forward(x))
            assert np.max(np.abs(back - x)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-8.0, 8.0), min_size=2, max_size=2))
def test_membership_consistency_property(coords):
    x = np.array(coords)
    for spec in (ActivationSpec.relu(2), ActivationSpec.sigmoid(2), BOX):
        assert spec.in_image(spec.forward(x)) == spec.in_region(x)


def test_membership_consistency_bulk(rng):
    X = rng.standard_normal((10_000, 2))
    for spec in (ActivationSpec.relu(2), ActivationSpec.sigmoid(2), BOX):
        fwd = np.stack([spec.forward(x) for x in X])
        assert np.array_equal(spec.image_mask(fwd), spec.region_mask(X))


def test_vectorized_masks_match_scalar(rng):
    X = rng.standard_normal((200, 2))
    for spec in (ActivationSpec.relu(2), ActivationSpec.sigmoid(2), BOX):
        mask = spec.region_mask(X)
        assert all(mask[i] == spec.in_region(X[i]) for i in range(len(X)))


def test_serialization_roundtrip():
    for spec in (ActivationSpec.relu(4), ActivationSpec.sigmoid(2), BOX):
        again = ActivationSpec.from_dict(spec.to_dict())
        assert again.to_dict() == spec.to_dict()
