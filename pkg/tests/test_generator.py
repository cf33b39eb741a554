"""
Tests for the reduced generator, its adjoint and the energy inner product.
"""
import numpy as np
import pytest

from models.generator import adjoint_apply, apply, build_generator
from utils.errors import DimensionError
from utils.fem import energy_inner_product
from utils.mesh import make_reference_geometry


def _random(bundle, seed):
    return np.random.default_rng(seed).standard_normal(bundle.dimension)


def test_dimension_splits_into_fluid_and_displacement(box):
    bundle = box.bundle
    assert bundle.dimension == bundle.n_fluid + bundle.n_displacement
    assert bundle.n_fluid == box.reducer.dimension
    assert bundle.K.shape == (bundle.dimension, bundle.dimension)


def test_reduced_inner_product_matches_energy_inner_product(box):
    bundle = box.bundle
    x1, x2 = _random(bundle, 0), _random(bundle, 1)
    expected = energy_inner_product(bundle.from_reduced(x1), bundle.from_reduced(x2), box.forms)
    assert bundle.inner(x1, x2) == pytest.approx(expected, rel=1e-10)


def test_dissipation_identity(box):
    bundle = box.bundle
    for seed in range(5):
        x = _random(bundle, seed)
        value = np.real(bundle.inner(bundle.apply_reduced(x), x))
        assert value == pytest.approx(-bundle.dissipation(x), rel=1e-10, abs=1e-12 * bundle.norm(x) ** 2)
        assert bundle.dissipation(x) >= 0


def test_dense_generator_matches_application(box):
    bundle = box.bundle
    x = _random(bundle, 2)
    assert np.allclose(bundle.A_dense @ x, bundle.apply_reduced(x), rtol=1e-9, atol=1e-9)
    assert np.allclose(bundle.adjoint_dense @ x, bundle.adjoint_apply_reduced(x), rtol=1e-9, atol=1e-9)


def test_adjoint_in_energy_inner_product(box):
    bundle = box.bundle
    x, z = _random(bundle, 3), _random(bundle, 4)
    left = bundle.inner(bundle.apply_reduced(x), z)
    right = bundle.inner(x, bundle.adjoint_apply_reduced(z))
    assert left == pytest.approx(right, rel=1e-9)


def test_state_level_application(box):
    bundle = box.bundle
    state = bundle.from_reduced(_random(bundle, 5))
    image = apply(bundle, state)
    assert np.allclose(bundle.to_reduced(image), bundle.apply_reduced(bundle.to_reduced(state)), atol=1e-9)
    assert adjoint_apply(bundle, state).velocity.shape == (box.layout.n_velocity,)


def test_displacement_rate_is_velocity_trace(box):
    bundle = box.bundle
    state = bundle.from_reduced(_random(bundle, 6))
    rate, pressure = bundle.apply_with_pressure(state)
    assert np.allclose(rate.displacement, box.layout.restriction @ state.velocity)
    assert pressure.shape == (box.layout.n_p,)


def test_whitening_preserves_norm(box):
    bundle = box.bundle
    x = _random(bundle, 7)
    z = bundle.to_whitened(x)
    assert np.linalg.norm(z) == pytest.approx(bundle.norm(x), rel=1e-12)
    assert np.allclose(bundle.from_whitened(z), x, atol=1e-10)


def test_whitened_generator_is_similar(box):
    bundle = box.bundle
    x = _random(bundle, 8)
    left = bundle.whitened() @ bundle.to_whitened(x)
    right = bundle.to_whitened(bundle.apply_reduced(x))
    assert np.allclose(left, right, atol=1e-9 * np.abs(right).max())


def test_generator_is_dissipative(box):
    assert box.bundle.dissipativity_residual() <= 1e-12


def test_disabled_dissipation_gives_skew_stiffness(skew_bundle):
    assert np.abs(skew_bundle.K + skew_bundle.K.T).max() == 0.0
    x = _random(skew_bundle, 9)
    assert abs(np.real(skew_bundle.inner(skew_bundle.apply_reduced(x), x))) < 1e-10 * skew_bundle.norm(x) ** 2


def test_reduced_size_is_checked(box):
    with pytest.raises(DimensionError):
        box.bundle.from_reduced(np.zeros(box.bundle.dimension + 1))
    with pytest.raises(DimensionError):
        box.bundle.apply_reduced(np.zeros(3))


def test_layout_from_other_mesh_is_rejected(box):
    other = make_reference_geometry("box_in_box", 6)
    with pytest.raises(ValueError):
        build_generator(other, box.layout, box.forms, box.reducer)
