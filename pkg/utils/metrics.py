"""
Verification checks tying the numerical evidence to the stability argument.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from models.evolution import EvolutionResult
from models.generator import GeneratorBundle
from models.nullspace_resolvent import NullspaceData, ZeroResolventSolver, project_reduced
from models.spectrum import (AssumptionComparison, AssumptionReport, AxisScan, AxisVerdict, SpectrumReport,
                             match_spectra)

logger = logging.getLogger(__name__)

PASS, FAIL, DOWNGRADED = "PASS", "FAIL", "DOWNGRADED"


@dataclass
class CheckResult:
    """Outcome of one named check."""

    name: str
    status: str
    invariant: str
    measured: Dict[str, Any] = field(default_factory=dict)
    tolerance: Optional[float] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL


class VerificationSuite:
    """Ordered verification checks with pass/fail, measured values and tolerances."""

    CHECKS = (
        "nullspace-dim",
        "nperp-characterization",
        "dissipativity",
        "spectrum-axis",
        "assumption",
        "resolvent-roundtrip",
        "decay",
        "adjoint-null",
    )

    # Module invariant each check exercises
    INVARIANTS = {
        "nullspace-dim": "nullspace_resolvent: zero is a simple eigenvalue spanned by phi_N",
        "nperp-characterization": "nullspace_resolvent: <Phi, phi_N>_H = alpha * l(Phi)",
        "dissipativity": "generator: Re<A_h Phi, Phi>_H = -u^T A_f u",
        "spectrum-axis": "spectrum: no nonzero eigenvalue on the imaginary axis",
        "assumption": "spectrum: no clamped Lame mode has a constant normal traction",
        "resolvent-roundtrip": "nullspace_resolvent: A_h is invertible on N-perp",
        "decay": "evolution: strong decay, contraction and invariance of N-perp",
        "adjoint-null": "generator: Null(A_h*) = Null(A_h)",
    }

    def __init__(self, tolerances: Dict[str, float], seed: int = 0):
        self.tolerances = dict(tolerances)
        self.seed = seed
        self.results: Dict[str, CheckResult] = {}

    def record(self, name: str, passed: bool, measured: Dict[str, Any], tolerance: Optional[float] = None,
               detail: str = "", downgraded: bool = False) -> CheckResult:
        if name not in self.CHECKS:
            raise ValueError(f"Unknown check: {name}. Known checks: {list(self.CHECKS)}")
        status = FAIL if not passed else (DOWNGRADED if downgraded else PASS)
        result = CheckResult(name, status, self.INVARIANTS[name], measured, tolerance, detail)
        self.results[name] = result
        log = logger.info if result.passed else logger.warning
        log(f"Check {name}: {status} {detail}".rstrip())
        return result

    @property
    def passed(self) -> bool:
        """True iff every check was run and none failed."""
        return len(self.results) == len(self.CHECKS) and all(r.passed for r in self.results.values())

    def ordered(self) -> List[CheckResult]:
        return [self.results[name] for name in self.CHECKS if name in self.results]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "seed": self.seed,
            "tolerances": self.tolerances,
            "checks": [asdict(r) for r in self.ordered()],
            "missing": [name for name in self.CHECKS if name not in self.results],
        }

    def get_summary_statistics(self) -> Dict[str, Any]:
        statuses = [r.status for r in self.ordered()]
        return {
            "total_checks": len(statuses),
            "passed": statuses.count(PASS),
            "downgraded": statuses.count(DOWNGRADED),
            "failed": statuses.count(FAIL),
        }

    def _rng(self, offset: int) -> np.random.Generator:
        return np.random.default_rng(self.seed + offset)

    # Individual checks

    def check_nullspace(self, spectrum: SpectrumReport, bundle: GeneratorBundle, nulldata: NullspaceData,
                        zero_tol: float = 1e-6) -> CheckResult:
        zero = np.flatnonzero(np.abs(spectrum.eigenvalues) < zero_tol)
        x_n = bundle.to_reduced(nulldata.state)
        cosine = 0.0
        if zero.size:
            v = spectrum.vectors[:, zero[0]]
            cosine = abs(bundle.inner(v, x_n)) / (bundle.norm(v) * bundle.norm(x_n))
        velocity = float(np.abs(nulldata.state.velocity).max(initial=0.0))
        passed = zero.size == 1 and cosine >= 1 - 1e-6 and velocity <= 1e-10
        return self.record("nullspace-dim", passed,
                           {"zero_eigenvalues": int(zero.size), "cosine": float(cosine),
                            "velocity_blocks": velocity}, zero_tol,
                           f"{zero.size} eigenvalue(s) below {zero_tol:.0e}, cosine={cosine:.12f}")

    def check_nperp(self, bundle: GeneratorBundle, nulldata: NullspaceData, n_samples: int = 100) -> CheckResult:
        rng = self._rng(1)
        x_n = bundle.to_reduced(nulldata.state)
        ratios, projected = [], []
        for _ in range(n_samples):
            x = rng.standard_normal(bundle.dimension)
            D = bundle.split(x)[1]
            ratios.append(bundle.inner(x, x_n) / (nulldata.functional @ D))
            p = project_reduced(bundle, x, nulldata)
            projected.append(abs(nulldata.functional @ bundle.split(p)[1]) / (nulldata.dual_norm * bundle.norm(x)))
        spread = float(np.max(np.abs(np.asarray(ratios) - nulldata.alpha)) / abs(nulldata.alpha))
        vanish = float(max(projected))
        passed = spread <= 1e-8 and vanish <= 1e-8
        return self.record("nperp-characterization", passed,
                           {"ratio_spread": spread, "projected_functional": vanish, "samples": n_samples},
                           1e-8, f"ratio spread={spread:.3e}, l after projection={vanish:.3e}")

    def check_dissipativity(self, bundle: GeneratorBundle, n_samples: int = 100) -> CheckResult:
        rng = self._rng(2)
        worst = 0.0
        for _ in range(n_samples):
            x = rng.standard_normal(bundle.dimension)
            defect = np.real(bundle.inner(bundle.apply_reduced(x), x)) + bundle.dissipation(x)
            worst = max(worst, abs(defect) / bundle.norm(x) ** 2)
        return self.record("dissipativity", worst <= 1e-10, {"max_defect": worst, "samples": n_samples},
                           1e-10, f"max |Re<A x, x> + D(x)| / |x|^2 = {worst:.3e}")

    def check_spectrum_axis(self, spectrum: SpectrumReport, verdict: AxisVerdict,
                            scan: Optional[AxisScan] = None,
                            assumption: Optional[AssumptionReport] = None) -> CheckResult:
        measured = {"gap": spectrum.gap, "spectral_abscissa": spectrum.spectral_abscissa,
                    "offending": len(verdict.offending), "zero_count": verdict.zero_count}
        passed = verdict.passed and spectrum.spectral_abscissa < 0 and spectrum.gap > verdict.tol
        if scan is not None:
            measured["scan_findings"] = int(scan.findings.size)
            measured["scan_max_norm"] = scan.max_norm
            passed = passed and scan.findings.size == 0
            ratios = scan.ratios
            if ratios is not None:
                finite = ratios[np.isfinite(ratios)]
                measured["min_norm_over_inverse_distance"] = float(np.min(finite, initial=np.inf))
                measured["max_norm_over_inverse_distance"] = float(np.max(finite, initial=-np.inf))
                measured["within_10_percent"] = scan.matches_reference(0.1)
                # |(z - A)^-1| >= 1 / dist(z, spectrum) in any norm
                passed = passed and bool(np.all(finite >= 1 - 1e-6))
        threshold = self.tolerances.get("assumption_tol", assumption.tol if assumption is not None else 0.0)
        downgraded = assumption is not None and bool(np.min(assumption.defects) <= threshold)
        detail = f"gap={spectrum.gap:.3e}, abscissa={spectrum.spectral_abscissa:.3e}"
        if downgraded:
            detail += f" (downgraded: a clamped mode has traction defect <= {threshold:.0e})"
        return self.record("spectrum-axis", passed, measured, verdict.tol, detail, downgraded)

    def check_assumption(self, report: AssumptionReport,
                         comparison: Optional[AssumptionComparison] = None) -> CheckResult:
        min_defect = float(np.min(report.defects))
        measured = {"verdict": report.verdict, "min_defect": min_defect, "modes": int(report.defects.size),
                    "max_pointwise_discrepancy": float(np.max(report.pointwise_discrepancy))}
        detail = f"{report.verdict}, min defect={min_defect:.3e}"
        downgraded = False
        if comparison is not None:
            measured["reproducible"] = comparison.reproducible
            measured["max_defect_change"] = float(comparison.defect_change.max())
            downgraded = not comparison.reproducible
            detail += f", defect change across meshes={comparison.defect_change.max():.3f}"
            if downgraded:
                detail += f" (downgraded: above {comparison.rtol:.0%})"
        return self.record("assumption", report.holds, measured, report.tol, detail, downgraded)

    def check_resolvent(self, solver: ZeroResolventSolver, n_samples: int = 20,
                        infsup: Optional[float] = None) -> CheckResult:
        bundle, nulldata = solver.bundle, solver.nulldata
        rng = self._rng(3)
        worst = 0.0
        for _ in range(n_samples):
            x = project_reduced(bundle, rng.standard_normal(bundle.dimension), nulldata)
            target = bundle.from_reduced(bundle.apply_reduced(x))
            solution = solver.solve(target)
            worst = max(worst, bundle.norm(solution.reduced - x) / bundle.norm(x))
        bound = solver.bound_constant
        measured = {"max_roundtrip_error": worst, "bound_constant": bound, "samples": n_samples}
        passed = worst <= 1e-7 and np.isfinite(bound)
        if infsup is not None:
            measured["infsup"] = infsup
            passed = passed and infsup > 0
        return self.record("resolvent-roundtrip", bool(passed), measured, 1e-7,
                           f"round trip error={worst:.3e}, bound constant={bound:.6e}")

    def check_decay(self, runs: Sequence[EvolutionResult], stationary: EvolutionResult,
                    threshold: float = 1e-3, invariance_tol: float = 1e-8,
                    spectral_abscissa: Optional[float] = None) -> CheckResult:
        ratios, horizons, monotone, defects = [], [], [], []
        for run in runs:
            trace = run.trace
            ratios.append(trace.decay_ratio())
            horizons.append(trace.horizon_below(threshold))
            monotone.append(trace.is_monotone())
            scale = np.sqrt(2 * trace.E[0]) if trace.E else 1.0
            defects.append(float(np.max(trace.l_defect)) / max(scale, 1e-300))
        E = np.asarray(stationary.trace.E)
        stationarity = float(np.max(np.abs(E - E[0])) / E[0]) if E.size else 0.0
        passed = bool(all(r < threshold for r in ratios) and all(monotone)
                      and max(defects, default=0.0) <= invariance_tol and stationarity <= 1e-8)
        measured = {"decay_ratios": ratios, "horizons": horizons, "monotone": monotone,
                    "max_nperp_defect": max(defects, default=0.0), "stationary_drift": stationarity}
        detail = (f"max E(T)/E(0)={max(ratios, default=float('nan')):.3e}, "
                  f"N-perp defect={max(defects, default=0.0):.3e}")
        if spectral_abscissa is not None:
            # E decays like exp(2 Re(lambda) t) along the slowest mode
            slowest = np.log(1 / threshold) / (2 * abs(spectral_abscissa)) if spectral_abscissa < 0 else np.inf
            measured["slowest_mode_horizon"] = float(slowest)
            detail += f", slowest-mode horizon={slowest:.3e}"
        return self.record("decay", passed, measured, threshold, detail)

    def check_adjoint_null(self, bundle: GeneratorBundle, nulldata: NullspaceData,
                           spectrum: Optional[SpectrumReport] = None,
                           adjoint_spectrum: Optional[SpectrumReport] = None, tol: float = 1e-8) -> CheckResult:
        x_n = bundle.to_reduced(nulldata.state)
        residual = bundle.norm(bundle.adjoint_apply_reduced(x_n)) / bundle.norm(x_n)
        measured = {"adjoint_residual": residual}
        passed = residual <= tol
        if spectrum is not None and adjoint_spectrum is not None:
            scale = max(1.0, float(np.abs(spectrum.eigenvalues).max(initial=0.0)))
            distance = match_spectra(np.conj(spectrum.eigenvalues), adjoint_spectrum.eigenvalues) / scale
            measured["conjugate_spectrum_distance"] = distance
            passed = passed and distance <= tol
        # lambda = 0 is an eigenvalue of A_h* with the same eigenvector
        logger.info(f"Adjoint steady state: |A* phi_N| / |phi_N| = {residual:.3e} at lambda = 0")
        return self.record("adjoint-null", bool(passed), measured, tol,
                           f"|A* phi_N|/|phi_N|={residual:.3e}")

    def summary_lines(self) -> List[str]:
        lines = []
        for r in self.ordered():
            lines.append(f"{r.name:<24} {r.status:<11} {r.detail}")
            lines.append(f"{'':<24} invariant: {r.invariant}")
        for name in self.CHECKS:
            if name not in self.results:
                lines.append(f"{name:<24} {'NOT RUN':<11}")
        return lines
