"""
Tests for the verification suite.
"""
import numpy as np
import pytest

from models.evolution import evolve
from models.nullspace_resolvent import ZeroResolventSolver, project_reduced
from models.spectrum import (
    AssumptionComparison,
    AssumptionReport,
    AxisScan,
    SpectrumReport,
    verify_no_imaginary_point_spectrum,
)
from utils.metrics import DOWNGRADED, FAIL, PASS, VerificationSuite
from utils.state_builder import random_state

TOLERANCES = {"linear_tol": 1e-8, "null_tol": 1e-8, "gap_tol": 1e-6, "assumption_tol": 1e-3}


def _assumption(defects, tol=1e-3):
    defects = np.asarray(defects, dtype=float)
    violated = np.flatnonzero(defects <= tol)
    n = defects.size
    return AssumptionReport(np.arange(1.0, n + 1), defects, np.zeros(n), np.ones(n), np.zeros(n), tol,
                            int(violated[0]) + 1 if violated.size else None)


@pytest.fixture
def suite():
    return VerificationSuite(TOLERANCES, seed=3)


def test_unknown_check_rejected(suite):
    with pytest.raises(ValueError, match="Unknown check"):
        suite.record("bogus", True, {})


def test_suite_needs_every_check(suite):
    suite.record("dissipativity", True, {})
    assert not suite.passed
    assert "decay" in suite.to_dict()["missing"]
    assert any("NOT RUN" in line for line in suite.summary_lines())


def test_downgraded_counts_as_passing(suite):
    for name in VerificationSuite.CHECKS:
        suite.record(name, True, {}, downgraded=name == "spectrum-axis")
    assert suite.passed
    stats = suite.get_summary_statistics()
    assert stats == {"total_checks": 8, "passed": 7, "downgraded": 1, "failed": 0}
    assert [c["name"] for c in suite.to_dict()["checks"]] == list(VerificationSuite.CHECKS)


def test_one_failure_fails_suite(suite):
    for name in VerificationSuite.CHECKS:
        suite.record(name, name != "decay", {})
    assert not suite.passed
    assert suite.results["decay"].status == FAIL


def test_assumption_check_statuses(suite):
    assert suite.check_assumption(_assumption([0.5, 0.3, 0.2])).status == PASS
    result = suite.check_assumption(_assumption([0.5, 1e-4, 0.2]))
    assert result.status == FAIL
    assert result.measured["verdict"] == "VIOLATED-AT-2"
    assert result.tolerance == 1e-3


def test_irreproducible_defects_downgrade_assumption(suite):
    comparison = AssumptionComparison(np.zeros(3), np.array([0.05, 0.4, 0.1]), rtol=0.2, floor=1e-3)
    result = suite.check_assumption(_assumption([0.5, 0.3, 0.2]), comparison)
    assert result.status == DOWNGRADED
    assert result.measured["reproducible"] is False
    assert result.measured["max_defect_change"] == pytest.approx(0.4)
    steady = AssumptionComparison(np.zeros(3), np.array([0.05, 0.1, 0.1]), rtol=0.2, floor=1e-3)
    assert suite.check_assumption(_assumption([0.5, 0.3, 0.2]), steady).status == PASS


def _stable_spectrum():
    eigenvalues = np.array([0.0, -0.5 + 1j, -0.5 - 1j, -2.0])
    return SpectrumReport(eigenvalues, np.zeros(4), np.zeros((4, 3)), np.zeros((0, 4)), "dense")


def test_spectrum_axis_reports_scan_ratio(suite):
    spectrum = _stable_spectrum()
    scan = AxisScan(np.array([1.0, 2.0]), np.array([2.4, 1.0]), True, reference=np.array([2.0, 1.0]))
    result = suite.check_spectrum_axis(spectrum, verify_no_imaginary_point_spectrum(spectrum, 1e-6), scan)
    assert result.status == PASS
    assert result.measured["min_norm_over_inverse_distance"] == pytest.approx(1.0)
    assert result.measured["max_norm_over_inverse_distance"] == pytest.approx(1.2)
    assert result.measured["within_10_percent"] is False


def test_spectrum_axis_downgrade_uses_configured_assumption_tol(suite):
    spectrum = _stable_spectrum()
    verdict = verify_no_imaginary_point_spectrum(spectrum, 1e-6)
    weak = _assumption([0.5, 5e-4, 0.2])
    assert suite.check_spectrum_axis(spectrum, verdict, assumption=weak).status == DOWNGRADED
    loose = VerificationSuite({**TOLERANCES, "assumption_tol": 1e-4})
    assert loose.check_spectrum_axis(spectrum, verdict, assumption=weak).status == PASS


def test_dissipativity_check_on_box(suite, box):
    result = suite.check_dissipativity(box.bundle, n_samples=10)
    assert result.status == PASS
    assert result.measured["max_defect"] <= 1e-10


def test_nperp_check_on_box(suite, box):
    assert suite.check_nperp(box.bundle, box.nulldata, n_samples=10).status == PASS


def test_adjoint_null_without_spectra(suite, box):
    result = suite.check_adjoint_null(box.bundle, box.nulldata, tol=1e-8)
    assert result.passed
    assert "conjugate_spectrum_distance" not in result.measured


def test_resolvent_roundtrip_check(suite, box):
    solver = ZeroResolventSolver(box.bundle, box.nulldata, box.saddle)
    result = suite.check_resolvent(solver, n_samples=3)
    assert result.measured["max_roundtrip_error"] < 1e-6
    assert np.isfinite(result.measured["bound_constant"])


def test_short_horizon_fails_decay(suite, box):
    bundle, nulldata = box.bundle, box.nulldata
    x0 = project_reduced(bundle, random_state(bundle, 5), nulldata)
    run = evolve(bundle, x0, 0.5, 0.1, nulldata=nulldata, progress=False)
    stationary = evolve(bundle, nulldata.state, 0.5, 0.1, nulldata=nulldata, progress=False)
    result = suite.check_decay([run], stationary)
    assert result.status == FAIL
    assert result.measured["monotone"] == [True]
    assert result.measured["stationary_drift"] <= 1e-8


def test_decay_reports_slowest_mode_horizon(suite, box):
    bundle, nulldata = box.bundle, box.nulldata
    x0 = project_reduced(bundle, random_state(bundle, 6), nulldata)
    run = evolve(bundle, x0, 0.3, 0.1, nulldata=nulldata, progress=False)
    stationary = evolve(bundle, nulldata.state, 0.3, 0.1, nulldata=nulldata, progress=False)
    result = suite.check_decay([run], stationary, spectral_abscissa=-1e-6)
    assert result.measured["slowest_mode_horizon"] == pytest.approx(np.log(1e3) / 2e-6)
    assert "slowest-mode horizon" in result.detail
