"""
Tests for the eigenvalue computation, the imaginary-axis checks and the
traction condition on the clamped elastic modes.
"""
import numpy as np
import pytest

from models.nullspace_resolvent import resolvent_bound_at_zero
from models.spectrum import (
    AssumptionReport,
    AxisScan,
    SpectrumReport,
    arendt_batty_checklist,
    check_assumption,
    compare_assumption,
    compute_spectrum,
    match_spectra,
    proof_chain_diagnostics,
    scan_imaginary_axis,
    verify_no_imaginary_point_spectrum,
)


@pytest.fixture(scope="module")
def box_spectrum(box):
    return compute_spectrum(box.bundle, dense=True)


def test_dense_spectrum_is_complete_and_dissipative(box, box_spectrum):
    assert box_spectrum.mode == "dense"
    assert box_spectrum.eigenvalues.size == box.bundle.dimension
    scale = np.abs(box_spectrum.eigenvalues).max()
    assert box_spectrum.eigenvalues.real.max() <= 1e-10 * scale
    assert box_spectrum.residuals.max() < 1e-8


def test_zero_eigenvalue_is_simple_and_spanned_by_steady_state(box, box_spectrum):
    assert box_spectrum.zero_mask.sum() == 1
    v = box_spectrum.zero_vector()
    x_n = box.bundle.to_reduced(box.nulldata.state)
    cosine = abs(box.bundle.inner(v, x_n)) / (box.bundle.norm(v) * box.bundle.norm(x_n))
    assert cosine == pytest.approx(1.0, abs=1e-6)


def test_component_fractions_are_bounded(box_spectrum):
    components = box_spectrum.components
    assert components.shape == (box_spectrum.eigenvalues.size, 3)
    assert np.all(components >= 0) and np.all(components <= 1 + 1e-12)


def test_adjoint_spectrum_is_conjugate(box, box_spectrum):
    adjoint = compute_spectrum(box.bundle, dense=True, adjoint=True)
    assert adjoint.adjoint
    scale = np.abs(box_spectrum.eigenvalues).max()
    assert match_spectra(np.conj(box_spectrum.eigenvalues), adjoint.eigenvalues) <= 1e-8 * scale


def test_sparse_eigenvalues_agree_with_dense(box, box_spectrum):
    sparse = compute_spectrum(box.bundle, n_eigs=6, shift=-0.5, dense=False)
    assert sparse.mode == "sparse"
    assert sparse.eigenvalues.size > 0
    for value in sparse.eigenvalues:
        distance = np.abs(box_spectrum.eigenvalues - value).min()
        assert distance <= 1e-6 * max(1.0, abs(value))
    assert sparse.residuals.max() < 1e-6


def test_selected_eigenvalues_are_nearest_to_shift(box, box_spectrum):
    selected = compute_spectrum(box.bundle, n_eigs=4, shift=-1.0, dense=True)
    distances = np.sort(np.abs(box_spectrum.eigenvalues + 1.0))
    assert np.abs(selected.eigenvalues + 1.0).max() <= distances[3] + 1e-9


def test_axis_verdict_on_plain_values():
    assert verify_no_imaginary_point_spectrum([0.0, -1 + 2j, -0.5], 1e-6).passed
    verdict = verify_no_imaginary_point_spectrum([0.0, 1e-9 + 3j, -1.0], 1e-6)
    assert not verdict.passed
    assert verdict.offending == [1e-9 + 3j]
    doubled = verify_no_imaginary_point_spectrum([0.0, 1e-9, -1.0], 1e-6)
    assert not doubled.passed and doubled.zero_count == 2


def test_undamped_generator_has_imaginary_spectrum(skew_bundle):
    report = compute_spectrum(skew_bundle, dense=True)
    scale = np.abs(report.eigenvalues).max()
    assert np.abs(report.eigenvalues.real).max() <= 1e-8 * scale
    assert not verify_no_imaginary_point_spectrum(report, 1e-6).passed


def test_match_spectra():
    assert match_spectra(np.array([1j, -1j, 0]), np.array([0, -1j, 1j])) == 0.0
    assert match_spectra(np.array([1.0, 2.0]), np.array([2.5, 1.0])) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        match_spectra(np.array([1.0]), np.array([1.0, 2.0]))


def test_restricted_scan_is_bounded_below_by_inverse_distance(box, box_spectrum):
    betas = np.array([0.0, 0.5, 1.5])
    scan = scan_imaginary_axis(box.bundle, betas, nulldata=box.nulldata, restrict=True,
                               eigenvalues=box_spectrum.eigenvalues, progress=False)
    assert scan.restricted
    assert np.all(scan.norms >= scan.reference * (1 - 1e-6))
    assert np.all(scan.ratios >= 1 - 1e-6)
    record = scan.to_dict()
    assert record["min_ratio"] == pytest.approx(scan.ratios.min())
    assert isinstance(record["within_10_percent"], bool)
    assert scan.norms[0] == pytest.approx(resolvent_bound_at_zero(box.bundle, box.nulldata), rel=1e-6)


def test_unrestricted_scan_rejects_zero(box):
    with pytest.raises(ValueError):
        scan_imaginary_axis(box.bundle, [0.0, 1.0], progress=False)
    with pytest.raises(ValueError):
        scan_imaginary_axis(box.bundle, [1.0], restrict=True, progress=False)


def test_unrestricted_scan_away_from_zero(box):
    scan = scan_imaginary_axis(box.bundle, [0.7, 2.0], progress=False)
    assert not scan.restricted and scan.reference is None
    # 0 is an eigenvalue, so dist(i beta, spectrum) <= |beta|
    assert np.all(scan.norms >= 1.0 / np.array([0.7, 2.0]) * (1 - 1e-6))


def test_checklist_lists_every_hypothesis(box, box_spectrum):
    verdict = verify_no_imaginary_point_spectrum(box_spectrum, 1e-6)
    scan = scan_imaginary_axis(box.bundle, [0.5], nulldata=box.nulldata, restrict=True, progress=False)
    checklist = arendt_batty_checklist(box.bundle, verdict, scan, adjoint_null_residual=0.0)
    assert set(checklist) == {
        "contraction_semigroup", "countable_imaginary_spectrum", "simple_zero_eigenvalue",
        "no_imaginary_eigenvalues_on_Nperp", "zero_isolated_with_adjoint_null", "bounded_resolvent_on_axis",
    }
    assert checklist["contraction_semigroup"]["holds"]
    assert checklist["simple_zero_eigenvalue"]["holds"]


def test_near_axis_chain_flags_artifacts():
    report = SpectrumReport(
        eigenvalues=np.array([0.0, -1e-4 + 1j, -2e-4 + 2j, -5e-4 + 3j, -3.0]),
        residuals=np.zeros(5),
        components=np.array([[0, 0, 1], [0.01, 0.5, 0.3], [0.9, 0.2, 0.1], [0.01, 0.02, 0.05], [0.5, 0.5, 0.5]]),
        vectors=np.zeros((0, 5)),
        mode="dense",
    )
    rows = proof_chain_diagnostics(report, near_axis_tol=1e-3)
    assert len(rows) == 3
    assert [row["artifact"] for row in rows] == [True, False, False]
    assert [row["structure_trapped"] for row in rows] == [False, False, True]
    assert report.gap == pytest.approx(1e-4)
    assert report.spectral_abscissa == pytest.approx(-1e-4)


def test_clamped_mode_traction_report(box):
    report = check_assumption(box.mesh, box.forms, n_modes=6)
    assert report.tol == 1e-3
    assert report.beta_squared.size == 6
    assert np.all(np.diff(report.beta_squared) >= -1e-10)
    assert np.all(report.beta_squared > 0)
    assert np.all(report.defects >= 0)
    assert np.all(report.traction_norms > 0)
    assert np.all(report.defects <= 1 + 1e-8)
    assert report.verdict == "HOLDS" or report.verdict.startswith("VIOLATED-AT-")
    assert sorted(i for group in report.clusters for i in group) == list(range(6))


def test_assumption_verdict_names_first_violation():
    report = AssumptionReport(
        beta_squared=np.array([1.0, 2.0, 3.0]),
        defects=np.array([0.5, 0.4, 0.0]),
        constants=np.zeros(3),
        traction_norms=np.ones(3),
        pointwise_discrepancy=np.zeros(3),
        tol=1e-6,
        violated_at=3,
    )
    assert not report.holds
    assert report.verdict == "VIOLATED-AT-3"
    assert report.to_dict()["verdict"] == "VIOLATED-AT-3"


def test_scan_ratio_against_inverse_distance():
    scan = AxisScan(np.array([1.0, 2.0, 3.0]), np.array([1.05, 1.0, np.inf]), True,
                    reference=np.array([1.0, 1.0, 1.0]))
    assert scan.matches_reference(0.1)
    assert not scan.matches_reference(0.01)
    assert AxisScan(np.array([1.0]), np.array([1.0]), False).matches_reference() is None


def _report(beta_squared, defects, tol=1e-3):
    n = len(defects)
    return AssumptionReport(np.asarray(beta_squared, float), np.asarray(defects, float), np.zeros(n),
                            np.ones(n), np.zeros(n), tol)


def test_compare_assumption_matches_modes_by_eigenvalue():
    coarse = _report([1.0, 2.1, 3.0], [0.5, 0.2, 0.3])
    fine = _report([0.99, 2.9, 2.0], [0.45, 0.3, 0.3])
    comparison = compare_assumption(coarse, fine)
    np.testing.assert_allclose(comparison.defect_change, [0.05 / 0.45, 0.1 / 0.3, 0.0], atol=1e-12)
    assert comparison.beta_change[1] == pytest.approx(0.1 / 2.1)
    assert not comparison.reproducible
    assert comparison.to_dict()["max_defect_change"] == pytest.approx(1 / 3)


def test_compare_assumption_floors_tiny_defects():
    comparison = compare_assumption(_report([1.0], [2e-4]), _report([1.0], [1e-6]))
    assert comparison.defect_change[0] == pytest.approx((2e-4 - 1e-6) / 1e-3)
    assert comparison.reproducible
