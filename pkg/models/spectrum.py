"""
Spectral verification of the discrete generator.

Eigenvalues come either from a dense eigensolve of A_h in reduced
coordinates or from shift-invert Arnoldi on the descriptor pencil
(velocity, displacement, pressure), which never forms the divergence-free
basis products. Residuals and eigenvector components are measured in the
energy norm.

The structural condition behind the absence of imaginary eigenvalues is
checked separately on the clamped Lame eigenmodes of the solid.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import LinearOperator, eigs, eigsh
from tqdm import tqdm

from models.generator import GeneratorBundle
from models.nullspace_resolvent import DirichletMap, NullspaceData
from utils.errors import DimensionError, SolverError
from utils.fem import FormSet, cell_derivatives_at, facet_quadrature, vector_dofs
from utils.linalg import SparseFactor, resolvent_norm
from utils.mesh import Mesh, interface_frame
from utils.quadrature import p2_values

logger = logging.getLogger(__name__)

DENSE_LIMIT = 6000
SHIFT_RETRIES = 3
CLUSTER_RTOL = 1e-3


@dataclass(eq=False)
class SpectrumReport:
    """
    Computed eigenvalues of A_h (or its adjoint).

    Attributes:
        eigenvalues: Complex eigenvalues sorted by decreasing real part
        residuals: |A x - lambda x|_H / |x|_H per eigenpair
        components: (n, 3) energy fractions of u, h1 and h0 per eigenvector
        vectors: Reduced eigenvectors, one column per eigenvalue
        mode: "dense" or "sparse"
        shift: Shift actually used by the sparse solver
        zero_tol: Threshold below which an eigenvalue counts as zero
    """

    eigenvalues: np.ndarray
    residuals: np.ndarray
    components: np.ndarray
    vectors: np.ndarray
    mode: str
    shift: complex = 0.0
    zero_tol: float = 1e-6
    adjoint: bool = False

    @property
    def zero_mask(self) -> np.ndarray:
        return np.abs(self.eigenvalues) <= self.zero_tol

    @property
    def nonzero(self) -> np.ndarray:
        return self.eigenvalues[~self.zero_mask]

    @property
    def spectral_abscissa(self) -> float:
        """max Re(lambda) over the nonzero eigenvalues."""
        values = self.nonzero
        return float(values.real.max()) if values.size else float("-inf")

    @property
    def gap(self) -> float:
        """min |Re(lambda)| over the nonzero eigenvalues."""
        values = self.nonzero
        return float(np.abs(values.real).min()) if values.size else float("inf")

    def near_axis(self, tol: float) -> np.ndarray:
        """Indices of nonzero eigenvalues with |Re(lambda)| < tol."""
        return np.flatnonzero((np.abs(self.eigenvalues.real) < tol) & ~self.zero_mask)

    def zero_vector(self) -> Optional[np.ndarray]:
        """Eigenvector of the eigenvalue closest to zero (if it counts as zero)."""
        if not self.zero_mask.any():
            return None
        return self.vectors[:, int(np.argmin(np.abs(self.eigenvalues)))]

    def to_dict(self) -> Dict:
        return {
            "mode": self.mode,
            "adjoint": self.adjoint,
            "shift": [float(np.real(self.shift)), float(np.imag(self.shift))],
            "n_eigenvalues": int(self.eigenvalues.size),
            "zero_count": int(self.zero_mask.sum()),
            "spectral_abscissa": self.spectral_abscissa,
            "gap": self.gap,
            "max_residual": float(self.residuals.max(initial=0.0)),
        }


class _ComponentNorms:
    """Energy fractions of u, h1 and h0 in reduced coordinates."""

    def __init__(self, bundle: GeneratorBundle):
        forms, Z = bundle.forms, bundle.reducer.Z
        self.bundle = bundle
        self.fluid = Z.T @ (forms.M_f @ Z)
        self.interface = Z.T @ (forms.M_G @ Z)
        R = bundle.layout.restriction
        self.interface_elastic = (R @ forms.S_G @ R.T).tocsr()

    def __call__(self, X: np.ndarray) -> np.ndarray:
        nf = self.bundle.n_fluid
        Y, D = X[:nf], X[nf:]
        total = self._quad(Y, Y) + np.real(np.sum(np.conj(D) * (self.bundle.forms.K_D @ D), axis=0))
        total = np.maximum(total, 1e-300)
        parts = [
            np.real(np.sum(np.conj(Y) * (self.fluid @ Y), axis=0)),
            np.real(np.sum(np.conj(Y) * (self.interface @ Y), axis=0)),
            np.real(np.sum(np.conj(D) * (self.interface_elastic @ D), axis=0)),
        ]
        return np.column_stack([np.sqrt(np.maximum(p, 0.0) / total) for p in parts])

    @staticmethod
    def _quad(Y, W):
        return np.real(np.sum(np.conj(Y) * W, axis=0))


def _h_residuals(bundle: GeneratorBundle, matrix, eigenvalues: np.ndarray, X: np.ndarray) -> np.ndarray:
    nf = bundle.n_fluid
    K_D = bundle.forms.K_D

    def h_norms(V):
        top = np.sum(np.abs(V[:nf]) ** 2, axis=0)
        bottom = np.real(np.sum(np.conj(V[nf:]) * (K_D @ V[nf:]), axis=0))
        return np.sqrt(np.maximum(top + bottom, 0.0))

    AX = matrix(X) if callable(matrix) else matrix @ X
    return h_norms(AX - X * eigenvalues[None, :]) / np.maximum(h_norms(X), 1e-300)


def _normalize(bundle: GeneratorBundle, X: np.ndarray) -> np.ndarray:
    return X / np.array([max(bundle.norm(X[:, k]), 1e-300) for k in range(X.shape[1])])[None, :]


def _finish(bundle: GeneratorBundle, eigenvalues, X, matrix, mode, shift, zero_tol, adjoint) -> SpectrumReport:
    order = np.lexsort((np.abs(eigenvalues.imag), -eigenvalues.real))
    eigenvalues, X = eigenvalues[order], _normalize(bundle, X[:, order])
    residuals = _h_residuals(bundle, matrix, eigenvalues, X)
    report = SpectrumReport(eigenvalues, residuals, _ComponentNorms(bundle)(X), X, mode,
                            shift, zero_tol, adjoint)
    logger.info(f"Spectrum ({mode}{', adjoint' if adjoint else ''}): {eigenvalues.size} eigenvalues, "
                f"abscissa={report.spectral_abscissa:.6e}, gap={report.gap:.6e}, "
                f"max residual={report.residuals.max(initial=0.0):.3e}")
    return report


def _dense_spectrum(bundle: GeneratorBundle, n_eigs, shift, adjoint):
    A = bundle.adjoint_dense if adjoint else bundle.A_dense
    eigenvalues, X = sla.eig(A)
    if n_eigs is not None and n_eigs < eigenvalues.size:
        keep = np.argsort(np.abs(eigenvalues - shift))[:n_eigs]
        eigenvalues, X = eigenvalues[keep], X[:, keep]
    return eigenvalues, X, A


class DescriptorPencil:
    """
    Pencil (Acal, E) on free velocity, displacement and pressure:

        Acal = [[-A_f, -R^T K_D, B^T], [K_D R, 0, 0], [B, 0, 0]],  E = diag(M_V, K_D, 0).

    Finite eigenvalues of Acal x = lambda E x are those of A_h.
    """

    def __init__(self, bundle: GeneratorBundle, adjoint: bool = False):
        layout, forms = bundle.layout, bundle.forms
        free = layout.free_velocity
        self.bundle = bundle
        self.free = free
        K_D = forms.K_D
        A_f = forms.A_f[free][:, free]
        if bundle.disable_dissipation:
            A_f = sp.csr_matrix(A_f.shape)
        coupling = (K_D @ layout.restriction[:, free]).tocsr()
        B = forms.B[:, free]
        sign = -1.0 if adjoint else 1.0
        self.n_v, self.n_d, self.n_p = free.size, K_D.shape[0], B.shape[0]
        self.A = sp.bmat([
            [-A_f, -sign * coupling.T, B.T],
            [sign * coupling, None, None],
            [B, None, None],
        ], format="csc")
        self.E = sp.block_diag([forms.M_V[free][:, free], K_D,
                                sp.csr_matrix((self.n_p, self.n_p))], format="csc")

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def factor(self, shift: complex) -> SparseFactor:
        shifted = self.A - shift * self.E
        return SparseFactor(shifted, f"descriptor pencil at shift {shift}")

    def to_reduced(self, X: np.ndarray) -> np.ndarray:
        bundle = self.bundle
        V = np.zeros((bundle.layout.n_velocity, X.shape[1]), dtype=X.dtype)
        V[self.free] = X[:self.n_v]
        Y = bundle.reducer.Z.T @ (bundle.forms.M_V @ V)
        return np.vstack([Y, X[self.n_v:self.n_v + self.n_d]])


def _sparse_spectrum(bundle: GeneratorBundle, n_eigs, shift, adjoint, tol):
    pencil = DescriptorPencil(bundle, adjoint)
    k = min(n_eigs or 20, pencil.size - 2)
    factor = None
    for attempt in range(SHIFT_RETRIES + 1):
        try:
            factor = pencil.factor(shift)
            break
        except SolverError as e:
            new_shift = shift + 1e-3 * (1.0 + abs(shift))
            logger.warning(f"Shift {shift} hit the spectrum ({e}); retrying at {new_shift}")
            shift = new_shift
    if factor is None:
        raise SolverError(f"Shift-invert factorization failed after {SHIFT_RETRIES} retries")

    dtype = complex if np.iscomplex(shift) else float
    op = LinearOperator((pencil.size, pencil.size), dtype=dtype,
                        matvec=lambda x: factor.solve(pencil.E @ x))
    # Fixed start vector keeps repeated runs identical
    v0 = np.random.default_rng(0).standard_normal(pencil.size).astype(dtype)
    mu, X = eigs(op, k=k, which="LM", tol=tol, v0=v0)
    finite = np.abs(mu) > 1e-14
    eigenvalues = shift + 1.0 / mu[finite]
    reduced = pencil.to_reduced(X[:, finite])
    apply = bundle.adjoint_apply_reduced if adjoint else bundle.apply_reduced

    def matrix(V):
        return np.column_stack([apply(V[:, j]) for j in range(V.shape[1])])

    return eigenvalues, reduced, matrix, shift


def compute_spectrum(bundle: GeneratorBundle, n_eigs: Optional[int] = None, shift: complex = 0.0,
                     dense: Optional[bool] = None, zero_tol: float = 1e-6, adjoint: bool = False,
                     tol: float = 1e-12) -> SpectrumReport:
    """
    Eigenvalues of A_h (or A_h*) with energy-norm residuals.

    Args:
        bundle: Generator bundle
        n_eigs: Number of eigenvalues (all in dense mode when None)
        shift: Target of the selection / shift-invert point
        dense: Force the dense or sparse path (auto by dimension when None)
        zero_tol: Eigenvalues with |lambda| <= zero_tol count as zero
        adjoint: Compute the spectrum of the adjoint
        tol: Arnoldi tolerance

    Returns:
        SpectrumReport
    """
    if dense is None:
        dense = bundle.dimension <= DENSE_LIMIT
    if dense:
        eigenvalues, X, matrix = _dense_spectrum(bundle, n_eigs, shift, adjoint)
        return _finish(bundle, eigenvalues, X, matrix, "dense", shift, zero_tol, adjoint)
    eigenvalues, X, matrix, shift = _sparse_spectrum(bundle, n_eigs, shift, adjoint, tol)
    return _finish(bundle, eigenvalues, X, matrix, "sparse", shift, zero_tol, adjoint)


def match_spectra(first: np.ndarray, second: np.ndarray) -> float:
    """Largest distance of an optimal pairing between two eigenvalue multisets."""
    first, second = np.asarray(first), np.asarray(second)
    if first.size != second.size:
        raise ValueError(f"Cannot match spectra of sizes {first.size} and {second.size}")
    if first.size == 0:
        return 0.0
    cost = np.abs(first[:, None] - second[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


@dataclass
class AxisVerdict:
    """Outcome of the imaginary-axis eigenvalue test."""

    passed: bool
    zero_count: int
    offending: List[complex]
    tol: float

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "zero_count": self.zero_count,
            "offending": [[float(z.real), float(z.imag)] for z in self.offending],
            "tol": self.tol,
        }


def verify_no_imaginary_point_spectrum(spectrum: Union[SpectrumReport, Sequence[complex]],
                                       tol: float) -> AxisVerdict:
    """
    Pass iff every eigenvalue with |Re| <= tol has |lambda| <= tol and
    exactly one eigenvalue has |lambda| <= tol.
    """
    values = spectrum.eigenvalues if isinstance(spectrum, SpectrumReport) else np.asarray(spectrum, complex)
    on_axis = np.abs(values.real) <= tol
    zero = np.abs(values) <= tol
    offending = [complex(z) for z in values[on_axis & ~zero]]
    zero_count = int(zero.sum())
    passed = not offending and zero_count == 1
    if offending:
        logger.warning(f"Eigenvalues on the imaginary axis (tol={tol:.1e}): {offending[:5]}")
    if zero_count != 1:
        logger.warning(f"Expected a simple zero eigenvalue, found {zero_count} (tol={tol:.1e})")
    return AxisVerdict(passed, zero_count, offending, tol)


def proof_chain_diagnostics(report: SpectrumReport, near_axis_tol: float,
                            chain_tol: float = 0.1) -> List[Dict]:
    """
    Component fractions of the eigenvectors of near-axis eigenvalues.

    A near-axis mode should have small u, then small h1, then small h0;
    a mode where u is small but the interface parts are not is flagged as an
    artifact. A mode with all three small carries its energy in the
    structure interior and is flagged as trapped: it is damped only through
    its weak interface coupling and sets the slowest decay.
    """
    rows = []
    for k in report.near_axis(near_axis_tol):
        u, h1, h0 = report.components[k]
        small_u = u <= chain_tol
        rows.append({
            "eigenvalue": [float(report.eigenvalues[k].real), float(report.eigenvalues[k].imag)],
            "u": float(u), "h1": float(h1), "h0": float(h0),
            "artifact": bool(small_u and (h1 > chain_tol or h0 > chain_tol)),
            "structure_trapped": bool(small_u and h1 <= chain_tol and h0 <= chain_tol),
        })
    for row in rows:
        if row["artifact"]:
            logger.warning(f"Near-axis eigenvalue {row['eigenvalue']} breaks the vanishing chain "
                           f"(u={row['u']:.2e}, h1={row['h1']:.2e}, h0={row['h0']:.2e})")
    trapped = sum(row["structure_trapped"] for row in rows)
    if trapped:
        logger.warning(f"{trapped} near-axis eigenvalue(s) belong to structure-interior modes "
                       f"with weak interface coupling")
    return rows


@dataclass(eq=False)
class AxisScan:
    """Resolvent norms along i*beta."""

    betas: np.ndarray
    norms: np.ndarray
    restricted: bool
    reference: Optional[np.ndarray] = None     # 1 / dist(i beta, nonzero spectrum)

    @property
    def findings(self) -> np.ndarray:
        return self.betas[~np.isfinite(self.norms)]

    @property
    def max_norm(self) -> float:
        finite = self.norms[np.isfinite(self.norms)]
        return float(finite.max()) if finite.size else float("inf")

    @property
    def ratios(self) -> Optional[np.ndarray]:
        """norm * dist(i beta, nonzero spectrum); never below 1, equal to 1 for a normal generator."""
        if self.reference is None:
            return None
        return self.norms / self.reference

    def matches_reference(self, rtol: float = 0.1) -> Optional[bool]:
        """Whether every finite norm lies within rtol of 1 / dist(i beta, nonzero spectrum)."""
        ratios = self.ratios
        if ratios is None:
            return None
        finite = ratios[np.isfinite(ratios)]
        return bool(np.all(np.abs(finite - 1.0) <= rtol))

    def to_dict(self) -> Dict:
        record = {
            "restricted": self.restricted,
            "n_points": int(self.betas.size),
            "max_norm": self.max_norm,
            "findings": [float(b) for b in self.findings],
        }
        ratios = self.ratios
        if ratios is not None:
            finite = ratios[np.isfinite(ratios)]
            record.update({
                "min_ratio": float(finite.min()) if finite.size else None,
                "max_ratio": float(finite.max()) if finite.size else None,
                "within_10_percent": self.matches_reference(0.1),
            })
        return record


def scan_imaginary_axis(bundle: GeneratorBundle, betas: Sequence[float],
                        nulldata: Optional[NullspaceData] = None, restrict: bool = False,
                        eigenvalues: Optional[np.ndarray] = None,
                        singular_threshold: float = 1e10, progress: bool = True) -> AxisScan:
    """
    |(i beta - A_h)^-1| in the energy norm on a grid of beta.

    Args:
        bundle: Generator bundle
        betas: Real grid; 0 is allowed only for the N-perp restricted scan
        nulldata: Required when ``restrict`` is set
        restrict: Restrict the resolvent to the orthogonal complement of phi_N
        eigenvalues: If given, 1 / dist(i beta, nonzero eigenvalues) is stored for comparison
        singular_threshold: Norms above this are reported as infinite (a finding)

    Returns:
        AxisScan
    """
    betas = np.asarray(betas, dtype=float)
    if restrict and nulldata is None:
        raise ValueError("Restricted scan needs the nullvector data")
    if not restrict and np.any(betas == 0):
        raise ValueError("Grid contains beta = 0; the resolvent exists there only on N-perp (restrict=True)")

    A = bundle.whitened()
    border = None
    if restrict:
        border = bundle.to_whitened(bundle.to_reduced(nulldata.state))
        border = border / np.linalg.norm(border)

    norms = np.empty(betas.size)
    for i, beta in enumerate(tqdm(betas, desc="Axis scan", disable=not progress)):
        norms[i] = resolvent_norm(A, 1j * beta, border=border, singular_threshold=singular_threshold)
        if not np.isfinite(norms[i]):
            logger.warning(f"FINDING: resolvent blows up at beta={beta:.6g}")

    reference = None
    if eigenvalues is not None:
        values = np.asarray(eigenvalues)
        values = values[np.abs(values) > 1e-8]
        reference = np.array([1.0 / np.abs(1j * b - values).min() for b in betas])
    scan = AxisScan(betas, norms, restrict, reference)
    logger.info(f"Axis scan: {betas.size} points, max finite norm={scan.max_norm:.6e}, "
                f"{scan.findings.size} findings")
    if reference is not None:
        ratios = scan.ratios[np.isfinite(scan.ratios)]
        if ratios.size:
            logger.info(f"Axis scan: norm * dist(i beta, spectrum) in [{ratios.min():.4f}, {ratios.max():.4f}]")
    return scan


def arendt_batty_checklist(bundle: GeneratorBundle, verdict: AxisVerdict,
                           scan: Optional[AxisScan] = None, adjoint_null_residual: Optional[float] = None,
                           tol: float = 1e-10) -> Dict[str, Dict]:
    """
    Hypotheses of the strong-stability argument with their numerical evidence.

    Args:
        bundle: Generator bundle
        verdict: Imaginary-axis eigenvalue verdict
        scan: Optional resolvent scan along the axis
        adjoint_null_residual: |A_h* phi_N|_H / |phi_N|_H, if computed
        tol: Tolerance for the residual-type hypotheses
    """
    dissipativity = bundle.dissipativity_residual()
    checklist = {
        "contraction_semigroup": {
            "holds": bool(dissipativity <= tol),
            "evidence": f"top eigenvalue of sym(K)/|K| = {dissipativity:.3e}",
        },
        "countable_imaginary_spectrum": {
            "holds": True,
            "evidence": f"finite discrete spectrum (dimension {bundle.dimension})",
        },
        "simple_zero_eigenvalue": {
            "holds": verdict.zero_count == 1,
            "evidence": f"{verdict.zero_count} eigenvalue(s) with |lambda| <= {verdict.tol:.1e}",
        },
        "no_imaginary_eigenvalues_on_Nperp": {
            "holds": not verdict.offending,
            "evidence": f"{len(verdict.offending)} offending eigenvalue(s)",
        },
    }
    if adjoint_null_residual is not None:
        checklist["zero_isolated_with_adjoint_null"] = {
            "holds": bool(verdict.zero_count == 1 and adjoint_null_residual <= tol),
            "evidence": f"|A* phi_N| / |phi_N| = {adjoint_null_residual:.3e}",
        }
    if scan is not None:
        checklist["bounded_resolvent_on_axis"] = {
            "holds": scan.findings.size == 0,
            "evidence": f"max norm {scan.max_norm:.3e} over {scan.betas.size} points",
        }
    return checklist


@dataclass(eq=False)
class AssumptionReport:
    """
    Traction defects of the clamped Lame eigenmodes.

    defect_k = |t_k + c_k nu| / |t_k| minimized over c_k (and over the
    eigenspace for repeated eigenvalues); zero means the traction is a
    constant multiple of the normal and the structural condition fails.
    """

    beta_squared: np.ndarray
    defects: np.ndarray
    constants: np.ndarray
    traction_norms: np.ndarray
    pointwise_discrepancy: np.ndarray
    tol: float
    violated_at: Optional[int] = None
    clusters: List[List[int]] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "HOLDS" if self.violated_at is None else f"VIOLATED-AT-{self.violated_at}"

    @property
    def holds(self) -> bool:
        return self.violated_at is None

    def to_dict(self) -> Dict:
        return {
            "verdict": self.verdict,
            "tol": self.tol,
            "beta_squared": self.beta_squared.tolist(),
            "defects": self.defects.tolist(),
            "constants": self.constants.tolist(),
            "traction_norms": self.traction_norms.tolist(),
            "pointwise_discrepancy": self.pointwise_discrepancy.tolist(),
        }


def _clamped_modes(A: sp.csr_matrix, M: sp.csr_matrix, n_modes: int):
    n = A.shape[0]
    n_modes = min(n_modes, n - 1)
    if n <= 2500:
        return sla.eigh(A.toarray(), M.toarray(), subset_by_index=[0, n_modes - 1])
    v0 = np.random.default_rng(0).standard_normal(n)
    values, vectors = eigsh(A.tocsc(), k=n_modes, M=M.tocsc(), sigma=0.0, which="LM", v0=v0)
    order = np.argsort(values)
    return values[order], vectors[:, order]


def _clusters(values: np.ndarray, rtol: float = CLUSTER_RTOL) -> List[List[int]]:
    groups = [[0]]
    for k in range(1, values.size):
        if abs(values[k] - values[groups[-1][-1]]) <= rtol * max(abs(values[k]), 1.0):
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def _pointwise_traction(mesh: Mesh, forms: FormSet, W: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Relative L2 gap between sigma(w) nu from cell gradients and the weak traction field."""
    layout = forms.layout
    d = layout.dimension
    frame = interface_frame(mesh)
    lam, jw, xq = facet_quadrature(mesh, frame.facets)
    grads, _ = cell_derivatives_at(layout, frame.solid_cells, xq)
    nodes = layout.cell_nodes[frame.solid_cells]
    phi = p2_values(lam)
    facet_pos = np.searchsorted(layout.interface_nodes, layout.interface_facet_nodes)
    nu = frame.normals
    gaps = np.empty(W.shape[1])
    for k in range(W.shape[1]):
        values = W[:, k].reshape(-1, d)[nodes]                        # (nf, nb, d)
        G = np.einsum("fbc,fqbj->fqcj", values, grads)                # dw_c / dx_j
        div = np.trace(G, axis1=2, axis2=3)
        strain = G + np.swapaxes(G, 2, 3)
        pointwise = forms.mu * np.einsum("fqcj,fj->fqc", strain, nu) + forms.lam * div[:, :, None] * nu[:, None, :]
        weak = np.einsum("qb,fbc->fqc", phi, T[:, k].reshape(-1, d)[facet_pos])
        diff = np.einsum("fq,fqc->", jw, (pointwise - weak) ** 2)
        ref = np.einsum("fq,fqc->", jw, pointwise ** 2)
        gaps[k] = np.sqrt(diff / max(ref, 1e-300))
    return gaps


def check_assumption(mesh: Mesh, forms: FormSet, n_modes: int = 20, tol: float = 1e-3,
                     cluster_rtol: float = CLUSTER_RTOL) -> AssumptionReport:
    """
    Check that no clamped Lame eigenmode has a traction that is a constant
    multiple of the interface normal.

    For each mode (A_s - beta^2 M_s) w = 0 with w = 0 on Gamma_s and
    |w|_{M_s} = 1, the traction t = sigma(w) nu is recovered weakly from the
    interface rows of the residual. The defect is reported after removing
    the best constant normal part.

    Args:
        mesh: Mesh
        forms: Assembled forms
        n_modes: Number of lowest modes
        tol: Defects at or below tol violate the condition
        cluster_rtol: Relative eigenvalue spacing below which modes share an
            eigenspace (split pairs of a symmetric body stay together)

    Returns:
        AssumptionReport
    """
    layout = forms.layout
    d = layout.dimension
    R = layout.restriction
    A = (R @ forms.A_s @ R.T).tocsr()
    M = (R @ forms.M_s @ R.T).tocsr()
    extension = DirichletMap(forms)
    interior, boundary = extension.interior, extension.boundary

    beta2, modes = _clamped_modes(A[interior][:, interior], M[interior][:, interior], n_modes)
    W = np.zeros((layout.n_w, beta2.size))
    W[interior] = modes

    idofs = vector_dofs(layout.interface_nodes, d)
    mass = forms.M_G[idofs][:, idofs]
    normal = forms.N_G[idofs]
    measure = interface_frame(mesh).total_measure
    residual = (A @ W - (M @ W) * beta2[None, :])[boundary]
    T = -SparseFactor(mass, "interface mass", symmetric=True).solve(residual)

    MT = mass @ T
    norms2 = np.sum(T * MT, axis=0)
    normal_part = normal @ T
    constants = -normal_part / measure
    traction_norms = np.sqrt(np.maximum(norms2, 0.0))

    clusters = _clusters(beta2, cluster_rtol)
    defects = np.empty(beta2.size)
    for group in clusters:
        Tg = T[:, group]
        full = Tg.T @ (mass @ Tg)
        perp = full - np.outer(normal @ Tg, normal @ Tg) / measure
        try:
            smallest = sla.eigh(0.5 * (perp + perp.T), 0.5 * (full + full.T), eigvals_only=True)[0]
        except sla.LinAlgError:
            smallest = 0.0      # some combination has zero traction
        defects[group] = np.sqrt(max(smallest, 0.0))

    pointwise = _pointwise_traction(mesh, forms, R.T @ W, T)

    violated = np.flatnonzero(defects <= tol)
    report = AssumptionReport(beta2, defects, constants, traction_norms, pointwise, tol,
                              int(violated[0]) + 1 if violated.size else None, clusters)
    logger.info(f"Assumption check on {beta2.size} clamped modes using the weak (Neumann) traction: "
                f"min defect={defects.min():.3e}, pointwise discrepancy up to {pointwise.max():.3e}")
    if not report.holds:
        logger.warning(f"Structural condition {report.verdict} (beta^2={beta2[violated[0]]:.6e}, "
                       f"defect={defects[violated[0]]:.3e})")
    return report


@dataclass(eq=False)
class AssumptionComparison:
    """Change of the lowest clamped modes and their defects between two meshes."""
    beta_change: np.ndarray
    defect_change: np.ndarray
    rtol: float
    floor: float

    @property
    def reproducible(self) -> bool:
        return bool(np.all(self.defect_change <= self.rtol))

    def to_dict(self) -> Dict:
        return {
            "reproducible": self.reproducible,
            "rtol": self.rtol,
            "floor": self.floor,
            "max_beta_change": float(self.beta_change.max()),
            "max_defect_change": float(self.defect_change.max()),
            "beta_change": self.beta_change.tolist(),
            "defect_change": self.defect_change.tolist(),
        }


def compare_assumption(first: AssumptionReport, second: AssumptionReport, n_modes: int = 10,
                       rtol: float = 0.2, floor: float = 1e-3) -> AssumptionComparison:
    """
    Match the lowest modes of two assumption reports by nearest beta^2 and
    compare their defects.

    Defect changes are taken relative to max(second defect, floor) so that
    defects below the floor do not blow the ratio up.
    """
    n = min(n_modes, first.beta_squared.size, second.beta_squared.size)
    if n == 0:
        raise DimensionError("Assumption reports hold no modes to compare")
    beta_change = np.empty(n)
    defect_change = np.empty(n)
    for k in range(n):
        beta = first.beta_squared[k]
        j = int(np.argmin(np.abs(second.beta_squared - beta)))
        beta_change[k] = abs(second.beta_squared[j] - beta) / max(abs(beta), 1e-300)
        defect_change[k] = abs(first.defects[k] - second.defects[j]) / max(second.defects[j], floor)
    comparison = AssumptionComparison(beta_change, defect_change, rtol, floor)
    logger.info(f"Assumption defects over {n} modes change by at most {defect_change.max():.3f} "
                f"between meshes (beta^2 by {beta_change.max():.3e})")
    return comparison
