#!/usr/bin/env python3
"""
Command-line front end for the multilayered fluid-structure spectral toolkit.

Usage:
    fsispectra <command> --config path [flags]

Commands: mesh, assemble, nullspace, spectrum, check-assumption, resolvent,
evolve, verify. Every command writes its artifacts and a manifest JSON into
the configured output directory.

Exit codes: 0 = pass, 1 = check failure, 2 = usage or configuration error.
"""
import argparse
import os
import platform
import sys
import time
from contextlib import contextmanager
from datetime import datetime
from functools import cached_property
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy
import yaml

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models.evolution import evolve
from models.generator import GeneratorBundle, build_generator
from models.nullspace_resolvent import (
    NullspaceData,
    SaddleProblem,
    ZeroResolventSolver,
    build_nullvector,
    build_saddle,
    estimate_infsup,
    project_reduced,
)
from models.pressure_elimination import LerayReducer, apply_pressure_maps, build_leray, pressure_discrepancy
from models.spectrum import (
    arendt_batty_checklist,
    check_assumption,
    compare_assumption,
    compute_spectrum,
    match_spectra,
    proof_chain_diagnostics,
    scan_imaginary_axis,
    verify_no_imaginary_point_spectrum,
)
from utils.config import comparison_resolution, config_hash, load_config, parse_scan
from utils.errors import ConfigError, DimensionError, MeshError, NotInComplementError, SolverError
from utils.fem import FormSet, SpaceLayout, assemble_forms, assemble_gram, build_layout, export_matrix
from utils.logger import setup_logger
from utils.mesh import (
    Mesh,
    interface_frame,
    interface_hausdorff_distance,
    load_mesh,
    make_reference_geometry,
    save_mesh,
)
from utils.metrics import VerificationSuite
from utils.report_io import non_finite_fields, report_to_record, write_json, write_report
from utils.state_builder import random_state, sample_initial_state, save_state_csv

COMMANDS = ("mesh", "assemble", "nullspace", "spectrum", "check-assumption", "resolvent", "evolve", "verify")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class VerificationPipeline:
    """Builds the discrete model lazily and runs the individual commands."""

    def __init__(self, config: Dict[str, Any], config_path: str = ""):
        """Initialize the pipeline with a validated configuration."""
        self.config = config
        self.config_path = config_path
        self.output_dir = config["output"]["directory"]
        self.formats = list(config["output"]["formats"])
        os.makedirs(self.output_dir, exist_ok=True)
        self.logger = setup_logger(
            log_level=config.get("log_level", "INFO"),
            log_dir=os.path.join(self.output_dir, "logs")
        )
        self.timings: Dict[str, float] = {}
        self.artifacts: List[str] = []
        self.records: Dict[str, Any] = {}
        self.logger.info(f"Initialized pipeline with config: {config_path or '<in-memory>'}")

    @contextmanager
    def _timed(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    # Discrete model

    @cached_property
    def mesh(self) -> Mesh:
        geometry = self.config["geometry"]
        with self._timed("mesh"):
            if geometry.get("mesh_file"):
                return load_mesh(geometry["mesh_file"])
            return make_reference_geometry(geometry["kind"], geometry["resolution"])

    @cached_property
    def layout(self) -> SpaceLayout:
        with self._timed("layout"):
            return build_layout(self.mesh)

    @cached_property
    def forms(self) -> FormSet:
        material = self.config["material"]
        with self._timed("assemble"):
            return assemble_forms(self.mesh, self.layout, lam=material["lambda"], mu=material["mu"])

    @cached_property
    def reducer(self) -> LerayReducer:
        with self._timed("leray"):
            return build_leray(self.layout, self.forms)

    @cached_property
    def bundle(self) -> GeneratorBundle:
        with self._timed("generator"):
            return build_generator(self.mesh, self.layout, self.forms, self.reducer,
                                   pressure_bc=self.config["pressure_bc"])

    @cached_property
    def saddle(self) -> SaddleProblem:
        return build_saddle(self.forms)

    @cached_property
    def nulldata(self) -> NullspaceData:
        with self._timed("nullspace"):
            return build_nullvector(self.forms, self.layout, saddle=self.saddle)

    # Commands

    def run_mesh(self) -> bool:
        mesh = self.mesh
        path = self._path("mesh.txt")
        save_mesh(mesh, path)
        self.artifacts.append(path)
        record = {
            "n_vertices": mesh.n_vertices,
            "n_cells": mesh.n_cells,
            "dimension": mesh.dimension,
            "interface_measure": interface_frame(mesh).total_measure,
        }
        if mesh.dimension == 2 and self.config["geometry"]["kind"] == "annulus_disc":
            record["interface_hausdorff_to_unit_circle"] = interface_hausdorff_distance(mesh)
        self.records["mesh"] = record
        self.logger.info(f"Mesh: {mesh.n_vertices} vertices, {mesh.n_cells} cells")
        return True

    def run_assemble(self) -> bool:
        forms = self.forms
        matrices = {
            "A_f": forms.A_f, "B": forms.B, "M_f": forms.M_f, "M_G": forms.M_G, "S_G": forms.S_G,
            "E_s": forms.E_s, "M_s": forms.M_s, "L_p": forms.L_p, "M_p": forms.M_p,
            "gram": assemble_gram(forms),
        }
        for name, matrix in matrices.items():
            path = self._path(os.path.join("matrices", f"{name}.mtx"))
            export_matrix(matrix, path, comment=f"fsispectra {name}")
            self.artifacts.append(path)
        self.records["assemble"] = {
            "n_velocity": self.layout.n_velocity,
            "n_displacement": self.layout.n_displacement,
            "n_pressure": self.layout.n_p,
            "divfree_dimension": self.reducer.dimension,
            "reduced_dimension": self.bundle.dimension,
            "divergence_residual": self.reducer.divergence_residual(),
            "dissipativity_residual": self.bundle.dissipativity_residual(),
        }
        return True

    def run_nullspace(self) -> bool:
        nulldata = self.nulldata
        infsup = estimate_infsup(self.saddle)
        path = self._path("phi_N.csv")
        save_state_csv(nulldata.state, path)
        self.artifacts.append(path)
        x_n = self.bundle.to_reduced(nulldata.state)
        residual = self.bundle.norm(self.bundle.apply_reduced(x_n)) / nulldata.h_norm
        null_tol = self.config["tolerances"]["null_tol"]
        self.records["nullspace"] = {
            "alpha": nulldata.alpha,
            "h_norm": nulldata.h_norm,
            "functional_dual_norm": nulldata.dual_norm,
            "infsup": infsup,
            "generator_residual": residual,
        }
        return residual <= null_tol

    def run_spectrum(self, n_eigs: Optional[int] = None, shift: Optional[float] = None,
                     dense: Optional[bool] = None, scan: Optional[Dict[str, Any]] = None) -> bool:
        spectrum_config = self.config["spectrum"]
        gap_tol = self.config["tolerances"]["gap_tol"]
        with self._timed("spectrum"):
            report = compute_spectrum(self.bundle, n_eigs=n_eigs if n_eigs is not None else spectrum_config["n_eigs"],
                                      shift=shift if shift is not None else spectrum_config["shift"],
                                      dense=dense if dense is not None else spectrum_config["dense"],
                                      zero_tol=gap_tol)
        verdict = verify_no_imaginary_point_spectrum(report, gap_tol)
        explicit_distance = None
        if report.mode == "dense" and report.eigenvalues.size == self.bundle.dimension:
            with self._timed("explicit_pressure_generator"):
                explicit = self.reducer.compress(self.reducer.explicit_generator(self.bundle.pressure_maps))
                explicit_distance = match_spectra(np.linalg.eigvals(explicit), report.eigenvalues)
            self.logger.info(f"Explicit pressure generator vs Leray spectrum: {explicit_distance:.3e}")
        scan_config = scan or spectrum_config["scan"]
        axis = None
        if scan_config and scan_config.get("steps", 0) > 0:
            betas = np.linspace(scan_config["beta_min"], scan_config["beta_max"], scan_config["steps"])
            restrict = bool(scan_config.get("restrict", True))
            if not restrict:
                betas = betas[betas != 0]
            with self._timed("axis_scan"):
                axis = scan_imaginary_axis(self.bundle, betas, nulldata=self.nulldata if restrict else None,
                                           restrict=restrict, eigenvalues=report.eigenvalues)
            self.artifacts += write_report(axis, self._path("axis_scan"), self.formats)
        checklist = arendt_batty_checklist(self.bundle, verdict, axis)
        self.artifacts += write_report(report, self._path("spectrum"), self.formats)
        self.records["spectrum"] = {
            "summary": report.to_dict(),
            "verdict": verdict.to_dict(),
            "near_axis": proof_chain_diagnostics(report, max(1e3 * gap_tol, 1e-3)),
            "checklist": checklist,
            "scan": axis.to_dict() if axis is not None else None,
            "explicit_pressure_distance": explicit_distance,
        }
        return verdict.passed and (axis is None or axis.findings.size == 0)

    def _assumption_reports(self, modes: int, tol: float):
        """Assumption report on the run mesh and, when configured, its comparison with a second mesh."""
        report = check_assumption(self.mesh, self.forms, n_modes=modes, tol=tol)
        other = comparison_resolution(self.config)
        if other is None:
            return report, None
        material = self.config["material"]
        mesh = make_reference_geometry(self.config["geometry"]["kind"], other)
        forms = assemble_forms(mesh, build_layout(mesh), lam=material["lambda"], mu=material["mu"])
        second = check_assumption(mesh, forms, n_modes=modes, tol=tol)
        return report, compare_assumption(second, report, n_modes=min(modes, 10))

    def run_check_assumption(self, modes: Optional[int] = None, tol: Optional[float] = None) -> bool:
        with self._timed("assumption"):
            report, comparison = self._assumption_reports(
                modes or self.config["assumption"]["modes"],
                tol if tol is not None else self.config["tolerances"]["assumption_tol"])
        self.artifacts += write_report(report, self._path("assumption"), self.formats)
        self.records["check-assumption"] = {
            "verdict": report.verdict,
            "min_defect": float(report.defects.min()),
            "comparison": comparison.to_dict() if comparison is not None else None,
        }
        return report.holds and (comparison is None or comparison.reproducible)

    def run_resolvent(self) -> bool:
        bundle = self.bundle
        with self._timed("resolvent"):
            solver = ZeroResolventSolver(bundle, self.nulldata, self.saddle)
            target = project_reduced(bundle, random_state(bundle, self.config["seed"]), self.nulldata)
            solution = solver.solve(bundle.from_reduced(target))
            bound = solver.bound_constant
        infsup = estimate_infsup(self.saddle)
        coords = self.mesh.vertices[self.layout.pressure_vertices]
        frame = pd.DataFrame(coords, columns=[f"x{i}" for i in range(coords.shape[1])])
        frame.insert(0, "vertex", self.layout.pressure_vertices)
        frame["p"] = np.real(solution.pressure)
        blocks = {k: np.real(v) for k, v in solution.state.blocks().items()}
        with self._timed("pressure_maps"):
            harmonic = apply_pressure_maps(bundle.pressure_maps, blocks["u"], blocks["h0"], blocks["w0"])
        frame["p_harmonic"] = harmonic
        state = solution.state
        multiplier = bundle.reducer.recover_pressure(np.real(state.velocity), np.real(state.displacement))
        frame["p_multiplier"] = multiplier
        path = self._path("resolvent_pressure.csv")
        frame.to_csv(path, index=False, float_format="%.17g")
        self.artifacts.append(path)
        path = self._path("resolvent_state.csv")
        save_state_csv(solution.state, path)
        self.artifacts.append(path)
        self.records["resolvent"] = {
            "residual": solution.residual,
            "c0": solution.c0,
            "bound_constant": bound,
            "infsup": infsup,
            "pressure_bc": bundle.pressure_bc,
            "harmonic_residual": bundle.pressure_maps.harmonic_residual(harmonic),
            "pressure_discrepancy": pressure_discrepancy(self.forms, harmonic, multiplier),
            "multiplier_harmonic_rms": bundle.pressure_maps.harmonic_residual(multiplier, rms=True),
        }
        return solution.residual <= self.config["tolerances"]["linear_tol"] and np.isfinite(bound)

    def run_evolve(self, T: Optional[float] = None, dt: Optional[float] = None, scheme: Optional[str] = None,
                   init: Optional[str] = None, init_file: Optional[str] = None,
                   project_initial: Optional[bool] = None) -> bool:
        evo = self.config["evolution"]
        bundle = self.bundle
        project = evo["project_initial"] if project_initial is None else project_initial
        initial = sample_initial_state(bundle, init or evo["init"], seed=self.config["seed"],
                                       path=init_file or evo.get("init_file"), nulldata=self.nulldata,
                                       project=project)
        with self._timed("evolve"):
            result = evolve(bundle, initial, T or evo["T"], dt or evo["dt"], scheme or evo["scheme"],
                            nulldata=self.nulldata, snapshot_every=evo["snapshot_every"],
                            record_pressure=True)
        self.artifacts += write_report(result.trace, self._path("energy"), ["csv"])
        for t, x in result.snapshots:
            path = self._path(os.path.join("snapshots", f"state_t{t:012.4f}.csv"))
            save_state_csv(bundle.from_reduced(x), path)
            self.artifacts.append(path)
        trace = result.trace
        self.records["evolve"] = {
            "scheme": result.scheme,
            "steps": len(trace) - 1,
            "decay_ratio": trace.decay_ratio(),
            "horizon_1e-3": trace.horizon_below(1e-3),
            "monotone": trace.is_monotone(),
            "max_balance_defect": trace.max_balance_defect(),
            "component_sum_defect": trace.component_sum_defect(),
            "decay_rate": trace.decay_rate(),
            "final_pressure_mean": trace.pressure_mean[-1] if trace.pressure_mean else None,
        }
        return trace.is_monotone() and trace.max_balance_defect() <= 1e-8

    def run_verify(self) -> bool:
        tolerances = self.config["tolerances"]
        suite = VerificationSuite(tolerances, seed=self.config["seed"])
        bundle, nulldata = self.bundle, self.nulldata
        gap_tol = tolerances["gap_tol"]

        with self._timed("verify_spectrum"):
            spectrum = compute_spectrum(bundle, dense=True, zero_tol=gap_tol)
            adjoint = compute_spectrum(bundle, dense=True, zero_tol=gap_tol, adjoint=True)
            verdict = verify_no_imaginary_point_spectrum(spectrum, gap_tol)
            scan_config = self.config["spectrum"]["scan"]
            betas = np.linspace(scan_config["beta_min"], scan_config["beta_max"], scan_config["steps"])
            scan = scan_imaginary_axis(bundle, betas, nulldata=nulldata, restrict=True,
                                       eigenvalues=spectrum.eigenvalues)
        with self._timed("verify_assumption"):
            assumption, comparison = self._assumption_reports(self.config["assumption"]["modes"],
                                                              tolerances["assumption_tol"])

        suite.check_nullspace(spectrum, bundle, nulldata, zero_tol=gap_tol)
        suite.check_nperp(bundle, nulldata)
        suite.check_dissipativity(bundle)
        suite.check_spectrum_axis(spectrum, verdict, scan, assumption)
        suite.check_assumption(assumption, comparison)
        with self._timed("verify_resolvent"):
            solver = ZeroResolventSolver(bundle, nulldata, self.saddle)
            suite.check_resolvent(solver, infsup=estimate_infsup(self.saddle))

        evo = self.config["evolution"]
        with self._timed("verify_decay"):
            runs = []
            for k in range(evo.get("n_runs", 5)):
                x0 = project_reduced(bundle, random_state(bundle, self.config["seed"] + 100 + k), nulldata)
                runs.append(evolve(bundle, x0, evo["T"], evo["dt"], evo["scheme"], nulldata=nulldata))
            stationary = evolve(bundle, nulldata.state, evo["T"], evo["dt"], evo["scheme"], nulldata=nulldata)
        suite.check_decay(runs, stationary, invariance_tol=tolerances["null_tol"],
                          spectral_abscissa=spectrum.spectral_abscissa)
        suite.check_adjoint_null(bundle, nulldata, spectrum, adjoint, tol=tolerances["null_tol"])

        x_n = bundle.to_reduced(nulldata.state)
        adjoint_residual = bundle.norm(bundle.adjoint_apply_reduced(x_n)) / bundle.norm(x_n)
        self.records["verify"] = suite.to_dict()
        self.records["verify"]["summary_statistics"] = suite.get_summary_statistics()
        self.records["verify"]["checklist"] = arendt_batty_checklist(
            bundle, verdict, scan, adjoint_residual, tol=tolerances["null_tol"])
        self.records["verify"]["near_axis"] = proof_chain_diagnostics(spectrum, max(1e3 * gap_tol, 1e-3))
        self.artifacts += write_report(spectrum, self._path("verify_spectrum"), self.formats)
        self.artifacts += write_report(assumption, self._path("verify_assumption"), self.formats)
        path = self._path("verify_suite.json")
        write_json(self.records["verify"], path)
        self.artifacts.append(path)
        self._save_summary_report(suite, path.replace(".json", "_summary.txt"))
        return suite.passed

    # Outputs

    def _save_summary_report(self, suite: VerificationSuite, summary_path: str):
        """Save a human-readable summary report."""
        stats = suite.get_summary_statistics()
        with open(summary_path, "w", encoding="utf-8") as f:
            f.write("FSI SPECTRAL VERIFICATION SUMMARY REPORT\n")
            f.write("=" * 50 + "\n\n")
            f.write(f"Run Date: {datetime.now().isoformat()}\n")
            f.write(f"Geometry: {self.config['geometry']['kind']} "
                    f"(resolution {self.config['geometry']['resolution']})\n")
            f.write(f"Reduced Dimension: {self.bundle.dimension}\n")
            f.write(f"Config Hash: {config_hash(self.config)}\n\n")

            f.write("CHECK RESULTS\n")
            f.write("-" * 13 + "\n")
            for line in suite.summary_lines():
                f.write(line + "\n")
            f.write("\n")

            f.write("OVERALL\n")
            f.write("-" * 7 + "\n")
            f.write(f"Passed: {stats['passed']}  Downgraded: {stats['downgraded']}  Failed: {stats['failed']}\n")
            f.write(f"Verdict: {'PASS' if suite.passed else 'FAIL'}\n")
        self.artifacts.append(summary_path)
        self.logger.info(f"Summary report saved to: {summary_path}")

    def write_manifest(self, command: str, passed: bool) -> str:
        record = report_to_record(self.records.get(command, {}))
        manifest = {
            "command": command,
            "status": "PASS" if passed else "FAIL",
            "config_path": self.config_path,
            "config_hash": config_hash(self.config),
            "config": self.config,
            "seed": self.config["seed"],
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "pandas": pd.__version__,
                "pyyaml": yaml.__version__,
            },
            "results": record,
            "non_finite_fields": non_finite_fields(record),
            "artifacts": sorted(os.path.relpath(p, self.output_dir) for p in self.artifacts),
            "timings": {"finished": datetime.now().isoformat(),
                        **{k: round(v, 6) for k, v in self.timings.items()}},
        }
        if manifest["non_finite_fields"]:
            self.logger.warning(f"Non-finite values in {command} results: {manifest['non_finite_fields']}")
        path = self._path(f"manifest_{command.replace('-', '_')}.json")
        write_json(manifest, path)
        self.logger.info(f"Manifest saved to: {path}")
        return path

    def run(self, command: str, **kwargs) -> bool:
        """Run one command and write its manifest."""
        runners = {
            "mesh": self.run_mesh,
            "assemble": self.run_assemble,
            "nullspace": self.run_nullspace,
            "spectrum": self.run_spectrum,
            "check-assumption": self.run_check_assumption,
            "resolvent": self.run_resolvent,
            "evolve": self.run_evolve,
            "verify": self.run_verify,
        }
        self.logger.info(f"Running command: {command}")
        with self._timed(f"command_{command}"):
            passed = bool(runners[command](**kwargs))
        self.write_manifest(command, passed)
        self.logger.info(f"Command {command} finished: {'PASS' if passed else 'FAIL'}")
        return passed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsispectra",
        description="Finite-element spectral verification for multilayered structure-Stokes interaction"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subparsers.add_parser(command)
        sub.add_argument("--config", required=True, help="Path to configuration YAML file")
        sub.add_argument("--output", help="Override the output directory")
        sub.add_argument("--seed", type=int, help="Override the random seed")
        sub.add_argument("--log-level", help="Override the console log level")
        if command == "spectrum":
            sub.add_argument("--n-eigs", type=int, help="Number of eigenvalues")
            sub.add_argument("--shift", type=float, help="Shift for selection or shift-invert")
            sub.add_argument("--dense", action="store_true", default=None, help="Force the dense eigensolver")
            sub.add_argument("--scan", help="Imaginary-axis scan beta_min:beta_max:steps")
        elif command == "check-assumption":
            sub.add_argument("--modes", type=int, help="Number of clamped modes")
            sub.add_argument("--tol", type=float, help="Defect tolerance")
        elif command == "evolve":
            sub.add_argument("--T", type=float, dest="T", help="Final time")
            sub.add_argument("--dt", type=float, help="Time step")
            sub.add_argument("--scheme", help="midpoint or backward_euler")
            sub.add_argument("--init", choices=["random", "pluck", "file"], help="Initial state")
            sub.add_argument("--init-file", help="State CSV for --init file")
            sub.add_argument("--project-initial", action="store_true", default=None,
                             help="Project the initial state onto N-perp")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {
        "output.directory": args.output,
        "seed": args.seed,
        "log_level": args.log_level,
    }
    if args.command == "evolve":
        overrides.update({
            "evolution.T": args.T,
            "evolution.dt": args.dt,
            "evolution.scheme": args.scheme,
            "evolution.init": args.init,
            "evolution.init_file": args.init_file,
            "evolution.project_initial": args.project_initial,
        })
    if args.command == "spectrum" and args.scan:
        overrides["spectrum.scan"] = {**parse_scan(args.scan), "restrict": True}
    return overrides


def _command_kwargs(args: argparse.Namespace) -> Dict[str, Any]:
    if args.command == "spectrum":
        return {"n_eigs": args.n_eigs, "shift": args.shift, "dense": args.dense}
    if args.command == "check-assumption":
        return {"modes": args.modes, "tol": args.tol}
    return {}


def run_pipeline(config: Dict[str, Any], command: str, config_path: str = "", **kwargs) -> int:
    """
    Run one command on a validated configuration.

    Args:
        config: Configuration from load_config
        command: One of COMMANDS
        config_path: Recorded in the manifest
        **kwargs: Command-specific options

    Returns:
        int: Exit code
    """
    if command not in COMMANDS:
        print(f"Error: unknown command {command!r}. Commands: {list(COMMANDS)}", file=sys.stderr)
        return EXIT_USAGE
    pipeline = VerificationPipeline(config, config_path)
    try:
        passed = pipeline.run(command, **kwargs)
    except (DimensionError, MeshError, FileNotFoundError) as e:
        pipeline.logger.error(f"{command}: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, NotInComplementError) as e:
        pipeline.logger.error(f"{command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAIL

    print(f"\n{command.upper()} {'PASSED' if passed else 'FAILED'}")
    print(f"Outputs: {pipeline.output_dir}")
    return EXIT_PASS if passed else EXIT_FAIL


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_PASS

    try:
        config = load_config(args.config, _overrides(args))
    except (FileNotFoundError, ConfigError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE

    return run_pipeline(config, args.command, args.config, **_command_kwargs(args))


if __name__ == "__main__":
    sys.exit(main())
