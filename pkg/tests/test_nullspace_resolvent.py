"""
Tests for the steady state, the complement N-perp and the zero resolvent.
"""
import numpy as np
import pytest

from models.nullspace_resolvent import (
    DirichletMap,
    ZeroResolventSolver,
    build_nullvector,
    dirichlet_map,
    estimate_infsup,
    in_complement,
    infsup_witness,
    project_Nperp,
    project_reduced,
    resolvent_bound_at_zero,
    solve_resolvent_at_zero,
)
from utils.errors import NotInComplementError
from utils.fem import energy_inner_product


def _random(bundle, seed):
    return np.random.default_rng(seed).standard_normal(bundle.dimension)


@pytest.fixture(scope="module")
def box_solver(box):
    return ZeroResolventSolver(box.bundle, box.nulldata, box.saddle)


@pytest.mark.parametrize("problem", ["box", "annulus"])
def test_steady_state_is_annihilated(problem, request):
    p = request.getfixturevalue(problem)
    x_n = p.bundle.to_reduced(p.nulldata.state)
    assert np.all(p.nulldata.state.velocity == 0)
    assert p.bundle.norm(p.bundle.apply_reduced(x_n)) <= 1e-8 * p.nulldata.h_norm
    assert p.bundle.norm(p.bundle.adjoint_apply_reduced(x_n)) <= 1e-8 * p.nulldata.h_norm


def test_steady_state_is_linear_in_alpha(box):
    doubled = build_nullvector(box.forms, box.layout, alpha=2.0, saddle=box.saddle)
    assert np.allclose(doubled.state.displacement, 2 * box.nulldata.state.displacement)
    assert doubled.h_norm == pytest.approx(2 * box.nulldata.h_norm)


def test_inner_product_with_steady_state_is_boundary_functional(box):
    bundle, nulldata = box.bundle, box.nulldata
    x_n = bundle.to_reduced(nulldata.state)
    for seed in range(3):
        x = _random(bundle, seed)
        functional = nulldata.evaluate(bundle.from_reduced(x))
        assert bundle.inner(x, x_n) == pytest.approx(nulldata.alpha * functional, rel=1e-9)


def test_projection_lands_in_complement(box):
    bundle, nulldata = box.bundle, box.nulldata
    state = bundle.from_reduced(_random(bundle, 4))
    assert not in_complement(state, nulldata, box.forms)
    projected = project_Nperp(state, nulldata, box.forms)
    assert in_complement(projected, nulldata, box.forms)
    assert abs(energy_inner_product(projected, nulldata.state, box.forms)) < 1e-10 * nulldata.h_norm
    x = project_reduced(bundle, bundle.to_reduced(state), nulldata)
    assert np.allclose(x, bundle.to_reduced(projected), atol=1e-10)


def test_infsup_constant_is_dual_norm(box):
    beta = estimate_infsup(box.saddle)
    assert beta > 0
    assert beta == pytest.approx(box.nulldata.dual_norm, rel=1e-10)


def test_infsup_witness_is_positive(box):
    eta, extension, value = infsup_witness(box.forms)
    assert value > 0
    assert extension.shape == (box.layout.n_w,)
    _, _, flipped = infsup_witness(box.forms, sign=-1.0)
    assert flipped > 0


def test_dirichlet_map_extends_boundary_data(box):
    extension = DirichletMap(box.forms)
    g = np.random.default_rng(5).standard_normal(extension.boundary.size)
    f = extension(g)
    assert np.allclose(f[extension.boundary], g)
    assert extension.residual(f) < 1e-10
    assert np.allclose(dirichlet_map(box.forms, g), f)
    assert extension.bound_constant > 0


@pytest.mark.parametrize("problem", ["box", "annulus"])
def test_dirichlet_map_of_constant_is_rigid_translation(problem, request):
    forms = request.getfixturevalue(problem).forms
    d = forms.layout.dimension
    c = np.array([0.3, -0.7])[:d]
    extension = DirichletMap(forms)
    f = extension(np.tile(c, extension.boundary.size // d))
    assert np.allclose(f.reshape(-1, d), c, atol=1e-10)


def test_resolvent_round_trip(box, box_solver):
    bundle = box.bundle
    x = project_reduced(bundle, _random(bundle, 6), box.nulldata)
    target = bundle.from_reduced(bundle.apply_reduced(x))
    solution = box_solver.solve(target)
    assert solution.residual < 1e-8
    assert bundle.norm(solution.reduced - x) <= 1e-7 * bundle.norm(x)
    assert solution.pressure.shape == (box.layout.n_p,)
    assert np.allclose(solution.pressure, solution.q + solution.c0)


def test_resolvent_solution_stays_in_complement(box, box_solver):
    bundle = box.bundle
    target = bundle.from_reduced(project_reduced(bundle, _random(bundle, 7), box.nulldata))
    solution = box_solver.solve(target)
    assert abs(box.nulldata.evaluate(solution.state)) <= 1e-8 * box.nulldata.dual_norm * bundle.norm(solution.reduced)


def test_resolvent_rejects_input_outside_complement(box, box_solver):
    with pytest.raises(NotInComplementError):
        box_solver.solve(box.nulldata.state)


def test_resolvent_bound_dominates_samples(box, box_solver):
    bundle = box.bundle
    bound = box_solver.bound_constant
    assert np.isfinite(bound) and bound > 0
    assert bound == pytest.approx(resolvent_bound_at_zero(bundle, box.nulldata), rel=1e-8)
    for seed in range(8, 11):
        target = bundle.from_reduced(project_reduced(bundle, _random(bundle, seed), box.nulldata))
        solution = box_solver.solve(target)
        ratio = bundle.norm(solution.reduced) / bundle.norm(bundle.to_reduced(target))
        assert ratio <= bound * (1 + 1e-6)


def test_one_shot_solve_reports_bound(annulus):
    bundle = annulus.bundle
    target = bundle.from_reduced(project_reduced(bundle, _random(bundle, 12), annulus.nulldata))
    solution = solve_resolvent_at_zero(bundle, annulus.nulldata, target, with_bound=True)
    assert solution.residual < 1e-8
    assert solution.bound_constant is not None and solution.bound_constant > 0
