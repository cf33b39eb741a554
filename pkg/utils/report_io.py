"""
Report serialization.

Reports are written as JSON (records) or CSV (tables). CSV floats carry 17
significant digits and JSON floats use the shortest round-trip form, so
reading a report back reproduces every value bit for bit. Non-finite values
are written as the literals ``nan``, ``inf`` and ``-inf``.
"""
import io
import json
import logging
import math
import os
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from models.evolution import COMPONENTS, TRACE_COLUMNS, EnergyTrace
from models.spectrum import AssumptionReport, AxisScan, SpectrumReport

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = ("json", "csv")
FLOAT_FORMAT = "%.17g"

SPECTRUM_COLUMNS = ["re", "im", "residual", "u_fraction", "h1_fraction", "h0_fraction"]
ASSUMPTION_COLUMNS = ["k", "beta_squared", "c", "defect", "traction_norm", "pointwise_discrepancy"]
SCAN_COLUMNS = ["beta", "resolvent_norm", "inverse_distance", "ratio"]

Report = Union[SpectrumReport, EnergyTrace, AssumptionReport, AxisScan, Dict[str, Any]]


def _jsonable(value):
    """Plain Python types with non-finite floats replaced by their literals."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, (complex, np.complexfloating)):
        return [_jsonable(value.real), _jsonable(value.imag)]
    return value


def _float(value) -> float:
    return float(value) if isinstance(value, str) else value


def non_finite_fields(record: Any, prefix: str = "") -> List[str]:
    """Dotted paths of every non-finite float in a JSON-ready record."""
    found = []
    if isinstance(record, dict):
        for key, value in record.items():
            found += non_finite_fields(value, f"{prefix}{key}.")
    elif isinstance(record, list):
        for i, value in enumerate(record):
            found += non_finite_fields(value, f"{prefix}{i}.")
    elif record in ("nan", "inf", "-inf"):
        found.append(prefix.rstrip("."))
    return found


def report_to_frame(report: Report) -> pd.DataFrame:
    """Tabular form of a report."""
    if isinstance(report, SpectrumReport):
        data = np.column_stack([report.eigenvalues.real, report.eigenvalues.imag, report.residuals,
                                report.components.reshape(-1, 3)]) if report.eigenvalues.size else \
            np.empty((0, len(SPECTRUM_COLUMNS)))
        return pd.DataFrame(data, columns=SPECTRUM_COLUMNS)
    if isinstance(report, EnergyTrace):
        return report.to_frame()
    if isinstance(report, AssumptionReport):
        return pd.DataFrame({
            "k": np.arange(1, report.beta_squared.size + 1),
            "beta_squared": report.beta_squared,
            "c": report.constants,
            "defect": report.defects,
            "traction_norm": report.traction_norms,
            "pointwise_discrepancy": report.pointwise_discrepancy,
        }, columns=ASSUMPTION_COLUMNS)
    if isinstance(report, AxisScan):
        reference = report.reference if report.reference is not None else np.full(report.betas.size, np.nan)
        return pd.DataFrame({"beta": report.betas, "resolvent_norm": report.norms,
                             "inverse_distance": reference, "ratio": report.norms / reference},
                            columns=SCAN_COLUMNS)
    raise ValueError(f"No tabular form for report type {type(report).__name__}")


def report_to_record(report: Report) -> Dict[str, Any]:
    """JSON-ready record of a report."""
    if isinstance(report, dict):
        return _jsonable(report)
    record = {"type": type(report).__name__}
    if isinstance(report, SpectrumReport):
        record.update(report.to_dict())
        record["zero_tol"] = report.zero_tol
    elif isinstance(report, AssumptionReport):
        record.update(report.to_dict())
        record["clusters"] = report.clusters
    elif isinstance(report, AxisScan):
        record.update(report.to_dict())
    frame = report_to_frame(report)
    record["table"] = {column: frame[column].tolist() for column in frame.columns}
    return _jsonable(record)


def serialize_report(report: Report, fmt: str = "json") -> bytes:
    """
    Serialize a report.

    Args:
        report: SpectrumReport, EnergyTrace, AssumptionReport, AxisScan or a plain dict
        fmt: "json" or "csv"

    Returns:
        bytes: UTF-8 encoded document

    Raises:
        ValueError: unsupported format (or CSV of a plain dict)
    """
    if fmt not in SUPPORTED_FORMATS:
        raise ValueError(f"Unsupported format: {fmt}. Supported formats: {list(SUPPORTED_FORMATS)}")
    if fmt == "json":
        return json.dumps(report_to_record(report), indent=2, ensure_ascii=False).encode("utf-8")
    buffer = io.StringIO()
    report_to_frame(report).to_csv(buffer, index=False, float_format=FLOAT_FORMAT, na_rep="nan")
    return buffer.getvalue().encode("utf-8")


def _table_from(data: bytes, fmt: str) -> pd.DataFrame:
    if fmt == "csv":
        return pd.read_csv(io.BytesIO(data), float_precision="round_trip")
    record = json.loads(data.decode("utf-8"))
    table = {k: [_float(v) for v in values] for k, values in record["table"].items()}
    return pd.DataFrame(table)


def parse_report(data: bytes, fmt: str, kind: str):
    """
    Inverse of :func:`serialize_report` for the tabular reports.

    Args:
        data: Serialized document
        fmt: "json" or "csv"
        kind: "spectrum", "energy_trace", "assumption" or "scan"
    """
    if fmt not in SUPPORTED_FORMATS:
        raise ValueError(f"Unsupported format: {fmt}. Supported formats: {list(SUPPORTED_FORMATS)}")
    frame = _table_from(data, fmt)
    if kind == "spectrum":
        values = frame.reindex(columns=SPECTRUM_COLUMNS).to_numpy(dtype=float)
        extra = json.loads(data.decode("utf-8")) if fmt == "json" else {}
        return SpectrumReport(
            eigenvalues=values[:, 0] + 1j * values[:, 1],
            residuals=values[:, 2],
            components=values[:, 3:6],
            vectors=np.zeros((0, values.shape[0])),
            mode=extra.get("mode", "unknown"),
            zero_tol=_float(extra.get("zero_tol", 1e-6)),
        )
    if kind == "energy_trace":
        trace = EnergyTrace()
        frame = frame.reindex(columns=list(TRACE_COLUMNS))
        trace.t = frame["t"].astype(float).tolist()
        trace.E = frame["E"].astype(float).tolist()
        trace.D = frame["D"].astype(float).tolist()
        trace.l_defect = frame["l_defect"].astype(float).tolist()
        trace.components = {name: frame[name].astype(float).tolist() for name in COMPONENTS}
        trace.balance_defect = frame["balance_defect"].astype(float).tolist()
        return trace
    if kind == "assumption":
        extra = json.loads(data.decode("utf-8")) if fmt == "json" else {}
        defects = frame["defect"].to_numpy(dtype=float)
        tol = _float(extra.get("tol", 0.0))
        violated = np.flatnonzero(defects <= tol)
        return AssumptionReport(
            beta_squared=frame["beta_squared"].to_numpy(dtype=float),
            defects=defects,
            constants=frame["c"].to_numpy(dtype=float),
            traction_norms=frame["traction_norm"].to_numpy(dtype=float),
            pointwise_discrepancy=frame["pointwise_discrepancy"].to_numpy(dtype=float),
            tol=tol,
            violated_at=int(violated[0]) + 1 if violated.size else None,
        )
    if kind == "scan":
        reference = frame["inverse_distance"].to_numpy(dtype=float)
        extra = json.loads(data.decode("utf-8")) if fmt == "json" else {}
        return AxisScan(frame["beta"].to_numpy(dtype=float), frame["resolvent_norm"].to_numpy(dtype=float),
                        bool(extra.get("restricted", False)),
                        None if np.all(np.isnan(reference)) else reference)
    raise ValueError(f"Unknown report kind: {kind}")


def write_report(report: Report, path_stem: str, formats=("json", "csv")) -> List[str]:
    """Write a report next to ``path_stem`` in each requested format; returns the written paths."""
    directory = os.path.dirname(path_stem)
    if directory:
        os.makedirs(directory, exist_ok=True)
    paths = []
    for fmt in formats:
        if fmt == "csv" and isinstance(report, dict):
            continue
        path = f"{path_stem}.{fmt}"
        with open(path, "wb") as f:
            f.write(serialize_report(report, fmt))
        paths.append(path)
        logger.info(f"Report saved to: {path}")
    return paths


def write_json(record: Dict[str, Any], path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(record), f, ensure_ascii=False, indent=2)


def read_json(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
