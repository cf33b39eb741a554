"""
Tests for report serialization.
"""
import json

import numpy as np
import pytest

from models.evolution import TRACE_COLUMNS, evolve
from models.spectrum import AssumptionReport, AxisScan, compute_spectrum
from utils.report_io import (
    ASSUMPTION_COLUMNS,
    SCAN_COLUMNS,
    SPECTRUM_COLUMNS,
    non_finite_fields,
    parse_report,
    read_json,
    report_to_record,
    serialize_report,
    write_json,
    write_report,
)
from utils.state_builder import random_state


@pytest.fixture(scope="module")
def spectrum(box):
    return compute_spectrum(box.bundle, dense=True)


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_spectrum_values_survive_serialization(spectrum, fmt):
    parsed = parse_report(serialize_report(spectrum, fmt), fmt, "spectrum")
    assert np.array_equal(parsed.eigenvalues, spectrum.eigenvalues)
    assert np.array_equal(parsed.residuals, spectrum.residuals)
    assert np.array_equal(parsed.components, spectrum.components)


def test_spectrum_csv_header(spectrum):
    header = serialize_report(spectrum, "csv").decode("utf-8").splitlines()[0]
    assert header.split(",") == SPECTRUM_COLUMNS


def test_energy_trace_csv(box):
    trace = evolve(box.bundle, random_state(box.bundle, 0), T=0.3, dt=0.1, progress=False).trace
    text = serialize_report(trace, "csv")
    assert text.decode("utf-8").splitlines()[0].split(",") == list(TRACE_COLUMNS)
    parsed = parse_report(text, "csv", "energy_trace")
    assert parsed.E == trace.E
    assert parsed.balance_defect == trace.balance_defect


def _assumption():
    return AssumptionReport(
        beta_squared=np.array([1.5, 2.25]),
        defects=np.array([0.3, 1e-9]),
        constants=np.array([0.1, -0.2]),
        traction_norms=np.array([1.0, 2.0]),
        pointwise_discrepancy=np.array([0.01, 0.02]),
        tol=1e-6,
        violated_at=2,
        clusters=[[0], [1]],
    )


def test_assumption_report_json():
    record = json.loads(serialize_report(_assumption(), "json"))
    assert record["verdict"] == "VIOLATED-AT-2"
    assert list(record["table"]) == ASSUMPTION_COLUMNS
    parsed = parse_report(serialize_report(_assumption(), "json"), "json", "assumption")
    assert parsed.verdict == "VIOLATED-AT-2"
    assert np.array_equal(parsed.defects, _assumption().defects)


def test_non_finite_values_are_literals():
    scan = AxisScan(np.array([0.0, 1.0, 2.0]), np.array([1.0, np.inf, np.nan]), True)
    record = report_to_record(scan)
    assert record["table"]["resolvent_norm"] == [1.0, "inf", "nan"]
    assert record["findings"] == [1.0, 2.0]
    assert non_finite_fields(record) == ["table.resolvent_norm.1", "table.resolvent_norm.2",
                                         "table.inverse_distance.0", "table.inverse_distance.1",
                                         "table.inverse_distance.2", "table.ratio.0", "table.ratio.1",
                                         "table.ratio.2"]
    csv_text = serialize_report(scan, "csv").decode("utf-8")
    assert csv_text.splitlines()[0].split(",") == SCAN_COLUMNS
    assert "inf" in csv_text and "nan" in csv_text
    parsed = parse_report(serialize_report(scan, "json"), "json", "scan")
    assert np.isinf(parsed.norms[1]) and np.isnan(parsed.norms[2])
    assert parsed.restricted and parsed.reference is None


def test_unsupported_format(spectrum):
    with pytest.raises(ValueError):
        serialize_report(spectrum, "xml")
    with pytest.raises(ValueError):
        parse_report(b"", "xml", "spectrum")
    with pytest.raises(ValueError):
        parse_report(serialize_report(spectrum, "json"), "json", "histogram")


def test_write_report_formats(tmp_path, spectrum):
    paths = write_report(spectrum, str(tmp_path / "out" / "spectrum"), ["json", "csv"])
    assert [p.rsplit(".", 1)[1] for p in paths] == ["json", "csv"]
    # Plain records only have a JSON form
    paths = write_report({"gap": 0.5}, str(tmp_path / "out" / "summary"), ["json", "csv"])
    assert len(paths) == 1
    assert read_json(paths[0]) == {"gap": 0.5}


def test_write_json_handles_numpy(tmp_path):
    path = tmp_path / "record.json"
    write_json({"value": np.float64(2.5), "flag": np.bool_(True), "z": 1 + 2j, "bad": float("-inf")}, str(path))
    assert read_json(str(path)) == {"value": 2.5, "flag": True, "z": [1.0, 2.0], "bad": "-inf"}


def test_spectrum_record_fields(spectrum):
    record = report_to_record(spectrum)
    assert record["type"] == "SpectrumReport"
    assert record["zero_count"] == 1
    assert record["n_eigenvalues"] == spectrum.eigenvalues.size


def test_scan_reports_ratio_to_inverse_distance():
    scan = AxisScan(np.array([1.0, 2.0]), np.array([2.0, 1.05]), True, reference=np.array([1.0, 1.0]))
    record = report_to_record(scan)
    assert record["table"]["ratio"] == [2.0, 1.05]
    assert record["min_ratio"] == pytest.approx(1.05)
    assert record["max_ratio"] == pytest.approx(2.0)
    assert record["within_10_percent"] is False
    parsed = parse_report(serialize_report(scan, "csv"), "csv", "scan")
    assert np.allclose(parsed.ratios, [2.0, 1.05])
