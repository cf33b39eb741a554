"""
Tests for the divergence-free reduction and the harmonic pressure maps.
"""
import numpy as np
import pytest

from models.pressure_elimination import (
    PRESSURE_BCS,
    apply_pressure_maps,
    build_leray,
    build_pressure_maps,
    pressure_discrepancy,
    reduce_to_divfree,
)
from models.spectrum import match_spectra
from utils.errors import DimensionError, SolverError
from utils.fem import assemble_forms, build_layout
from utils.mesh import make_reference_geometry


def test_basis_is_mass_orthonormal_and_divergence_free(box):
    reducer, forms = box.reducer, box.forms
    Z = reducer.Z
    assert np.allclose(Z.T @ (forms.M_V @ Z), np.eye(reducer.dimension), atol=1e-10)
    assert reducer.divergence_residual() < 1e-10
    assert np.all(Z[box.layout.essential_velocity] == 0)


def test_divergence_rank_has_single_pressure_kernel(box):
    # Velocities vanish on the outer boundary only, so constants are not in the range of B
    assert box.reducer.rank in (box.layout.n_p - 1, box.layout.n_p)


def test_reduced_round_trip(box):
    rng = np.random.default_rng(0)
    y = rng.standard_normal(box.reducer.dimension)
    assert np.allclose(box.reducer.to_reduced(box.reducer.lift(y)), y, atol=1e-10)


def test_momentum_rate_is_divergence_free(box):
    rng = np.random.default_rng(1)
    velocity = box.reducer.lift(rng.standard_normal(box.reducer.dimension))
    displacement = rng.standard_normal(box.layout.n_displacement)
    rate, p = box.reducer.momentum_rate(velocity, displacement)
    assert p.shape == (box.layout.n_p,)
    scale = max(np.abs(rate).max(), 1.0)
    assert np.abs(box.forms.B @ rate).max() < 1e-9 * scale
    assert np.all(rate[box.layout.essential_velocity] == 0)


def test_consistent_pressure_operators_reproduce_multiplier(box):
    rng = np.random.default_rng(2)
    velocity = box.reducer.lift(rng.standard_normal(box.reducer.dimension))
    displacement = rng.standard_normal(box.layout.n_displacement)
    maps = box.reducer.consistent_pressure_operators()
    p = maps["P1"] @ velocity + (maps["P2"] + maps["P3"]) @ displacement
    expected = box.reducer.recover_pressure(velocity, displacement)
    assert np.allclose(p, expected, rtol=1e-9, atol=1e-9 * np.abs(expected).max())


def test_reduce_to_divfree_matches_generator_block(box):
    block = reduce_to_divfree({"A_f": box.forms.A_f}, box.reducer)["A_f"]
    assert np.allclose(block, box.bundle.dissipation_block, atol=1e-12)
    with pytest.raises(DimensionError):
        reduce_to_divfree(np.zeros((3, 3)), box.reducer)
    with pytest.raises(ValueError):
        reduce_to_divfree(box.forms.A_f, box.reducer, kind="tensor")


@pytest.mark.parametrize("bc", PRESSURE_BCS)
def test_harmonic_pressure_maps(box, bc):
    maps = build_pressure_maps(box.layout, box.forms, bc)
    rng = np.random.default_rng(3)
    layout = box.layout
    p = apply_pressure_maps(maps, rng.standard_normal(layout.n_u), rng.standard_normal(layout.n_h),
                            rng.standard_normal(layout.n_w))
    assert p.shape == (layout.n_p,)
    assert np.all(np.isfinite(p))
    assert maps.harmonic_residual(p) < 1e-10


def test_dirichlet_extension_of_constant(box):
    maps = build_pressure_maps(box.layout, box.forms, "dirichlet")
    load = maps.gamma_mass @ np.ones(box.layout.n_p)
    values = maps.gamma_values(load)
    assert np.allclose(values[maps.gamma_vertices], 1.0)
    assert np.allclose(maps.harmonic_extension(values), 1.0)


def test_pressure_maps_are_linear(box):
    maps = build_pressure_maps(box.layout, box.forms)
    layout = box.layout
    rng = np.random.default_rng(4)
    a = [rng.standard_normal(n) for n in (layout.n_u, layout.n_h, layout.n_w)]
    b = [rng.standard_normal(n) for n in (layout.n_u, layout.n_h, layout.n_w)]
    combined = apply_pressure_maps(maps, *[2 * x + y for x, y in zip(a, b)])
    separate = 2 * apply_pressure_maps(maps, *a) + apply_pressure_maps(maps, *b)
    assert np.allclose(combined, separate, atol=1e-9 * np.abs(separate).max())


def test_pressure_maps_reject_bad_input(box):
    with pytest.raises(ValueError):
        build_pressure_maps(box.layout, box.forms, "neumann")
    maps = build_pressure_maps(box.layout, box.forms)
    with pytest.raises(DimensionError):
        apply_pressure_maps(maps, np.zeros(2), np.zeros(box.layout.n_h), np.zeros(box.layout.n_w))


def test_explicit_generator_matches_momentum_rate(box):
    reducer, bundle, layout = box.reducer, box.bundle, box.layout
    rng = np.random.default_rng(6)
    x = rng.standard_normal(bundle.dimension)
    y, D = bundle.split(x)
    velocity = reducer.lift(y)
    free = layout.free_velocity
    rates = reducer.explicit_generator() @ np.concatenate([velocity[free], D])
    expected, _ = reducer.momentum_rate(velocity, D)
    scale = np.abs(expected).max()
    assert np.allclose(rates[:free.size], expected[free], atol=1e-8 * scale)
    assert np.allclose(rates[free.size:], layout.restriction @ velocity, atol=1e-12)
    # the rate stays divergence free and matches the reduced generator
    y_rate = bundle.split(bundle.apply_reduced(x))[0]
    assert np.allclose(reducer.lift(y_rate), expected, atol=1e-8 * scale)


@pytest.mark.parametrize("bc", PRESSURE_BCS)
def test_harmonic_generator_reduces_to_leray_generator(box, bc):
    maps = build_pressure_maps(box.layout, box.forms, bc)
    explicit = box.reducer.explicit_generator(maps)
    free = box.layout.free_velocity.size
    assert explicit.shape == (free + box.layout.n_displacement,) * 2
    reduced = box.reducer.compress(explicit)
    expected = box.bundle.A_dense
    scale = np.abs(expected).max()
    assert np.allclose(reduced, expected, atol=1e-9 * scale)
    distance = match_spectra(np.linalg.eigvals(reduced), np.linalg.eigvals(expected))
    assert distance <= 1e-6 * scale


def test_harmonic_generator_keeps_pressure_in_full_rate(box):
    # The harmonic pressure differs from the multiplier, so the full rate is not divergence free
    maps = build_pressure_maps(box.layout, box.forms, "robin")
    explicit = box.reducer.explicit_generator(maps)
    algebraic = box.reducer.explicit_generator()
    assert not np.allclose(explicit, algebraic)


def _harmonic(points):
    x, y = points[..., 0], points[..., 1]
    return x ** 2 - y ** 2 + 0.5 * x + 0.2


def _normal_derivative(points, normals):
    x, y = points[..., 0], points[..., 1]
    return (2 * x + 0.5) * normals[:, None, 0] - 2 * y * normals[:, None, 1]


def _fluid_problem(resolution):
    mesh = make_reference_geometry("annulus_disc", resolution)
    layout = build_layout(mesh)
    return mesh, layout, assemble_forms(mesh, layout)


def test_robin_maps_recover_manufactured_pressure():
    errors = []
    for resolution in (4, 6, 8):
        mesh, layout, forms = _fluid_problem(resolution)
        maps = build_pressure_maps(layout, forms, "robin")
        data = maps.interface_data(lambda pts, nu: _harmonic(pts) + _normal_derivative(pts, nu))
        p = maps.harmonic_extension(data, maps.outer_load(_normal_derivative))
        exact = _harmonic(mesh.vertices[layout.pressure_vertices])
        errors.append(np.abs(p - exact).max() / np.abs(exact).max())
        # p + dp/dnu reproduces the projected interface data
        trace = maps.robin_trace(p)
        assert np.allclose(trace, data[maps.gamma_vertices], atol=1e-9 * np.abs(data).max())
        assert maps.harmonic_residual(p) < 1e-10
    assert errors[1] < errors[0] and errors[2] < errors[1]
    assert errors[2] < 0.7 * errors[0]


def test_dirichlet_maps_impose_interface_values():
    mesh, layout, forms = _fluid_problem(6)
    maps = build_pressure_maps(layout, forms, "dirichlet")
    data = maps.interface_data(lambda pts, nu: _harmonic(pts))
    p = maps.harmonic_extension(data, maps.outer_load(_normal_derivative))
    assert np.allclose(p[maps.gamma_vertices], data[maps.gamma_vertices])
    exact = _harmonic(mesh.vertices[layout.pressure_vertices])
    assert np.abs(p - exact).max() < 0.1 * np.abs(exact).max()


def test_interface_data_rejects_wrong_shape(box):
    maps = build_pressure_maps(box.layout, box.forms)
    with pytest.raises(DimensionError):
        maps.interface_data(lambda pts, nu: np.zeros(3))


def test_pressure_discrepancy_ignores_constants(box):
    rng = np.random.default_rng(7)
    p = rng.standard_normal(box.layout.n_p)
    assert pressure_discrepancy(box.forms, p + 3.0, p) == pytest.approx(0.0, abs=1e-12)
    assert pressure_discrepancy(box.forms, 2 * p, p) == pytest.approx(1.0)
    with pytest.raises(SolverError):
        pressure_discrepancy(box.forms, p, np.ones(box.layout.n_p))


def _stream_velocity(points):
    # Curl of (4 - r^2)^2 (1 + x): divergence free and zero on the outer circle
    x, y = points[:, 0], points[:, 1]
    s = 4 - x ** 2 - y ** 2
    return np.column_stack([-4 * y * s * (1 + x), 4 * x * s * (1 + x) - s ** 2])


def _smooth_displacement(points):
    x, y = points[:, 0], points[:, 1]
    return 0.3 * np.column_stack([np.cos(0.8 * x - 0.4 * y), np.sin(0.5 * x + 0.9 * y)])


@pytest.fixture(scope="module")
def multiplier_pressures():
    """Smooth state and its Lagrange-multiplier pressure on refined annuli."""
    levels = {}
    for resolution in (4, 8, 12):
        _, layout, forms = _fluid_problem(resolution)
        reducer = build_leray(layout, forms)
        velocity = layout.interpolate(_stream_velocity)
        velocity[layout.essential_velocity] = 0.0
        displacement = layout.restriction @ layout.interpolate(_smooth_displacement)
        levels[resolution] = (layout, forms, velocity, displacement,
                              reducer.recover_pressure(velocity, displacement))
    return levels


def _discrepancies(levels, bc):
    values = []
    for layout, forms, velocity, displacement, multiplier in levels.values():
        maps = build_pressure_maps(layout, forms, bc)
        values.append(pressure_discrepancy(forms, maps.field_pressure(velocity, displacement), multiplier))
    return values


@pytest.mark.slow
def test_robin_pressure_converges_to_multiplier(multiplier_pressures):
    robin = _discrepancies(multiplier_pressures, "robin")
    dirichlet = _discrepancies(multiplier_pressures, "dirichlet")
    assert robin[1] < robin[0] and robin[2] < robin[1]
    assert robin[2] < dirichlet[2]


@pytest.mark.slow
@pytest.mark.parametrize("bc", PRESSURE_BCS)
def test_harmonic_outputs_under_refinement(multiplier_pressures, bc):
    for layout, forms, velocity, displacement, _ in multiplier_pressures.values():
        maps = build_pressure_maps(layout, forms, bc)
        w_field = layout.restriction.T @ displacement
        for part in maps.apply_components(velocity, w_field, w_field).values():
            assert maps.harmonic_residual(part) < 1e-10
