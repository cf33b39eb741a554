"""
Zero eigenspace and inversion of the generator on its orthogonal complement.

The steady states are spanned by phi_N = [0, h0, 0, w0, 0] where the
displacement solves K_D D = alpha N_D (interface load along the normal).
Since <Phi, phi_N>_H = alpha * int_{Gamma_s} nu . h0, the complement N-perp
is the kernel of the boundary functional l(Phi) = N_D . D.

On N-perp the equation A_h Phi = Phi* is solved in two steps: a Stokes
problem on the fluid with the velocity prescribed on the solid closure, then
a mixed problem for the displacement and the constant part c0 of the
pressure with the single constraint l(D) = 0.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from models.generator import GeneratorBundle
from utils.errors import NotInComplementError, SolverError
from utils.fem import FormSet, SpaceLayout, StateVector, energy_inner_product, vector_dofs
from utils.linalg import SparseFactor, resolvent_norm

logger = logging.getLogger(__name__)

COMPLEMENT_TOL = 1e-9


@dataclass(eq=False)
class NullspaceData:
    """Steady state phi_N and the boundary functional l."""

    alpha: float
    state: StateVector
    functional: np.ndarray      # N_D, l(Phi) = N_D . D
    h_norm: float
    dual_norm: float            # sqrt(N_D^T K_D^-1 N_D), norm of l on H

    def evaluate(self, state: StateVector):
        """l(Phi) = int_{Gamma_s} nu . h0."""
        return self.functional @ state.displacement


@dataclass(eq=False)
class SaddleProblem:
    """
    Mixed problem a(D, psi) - c0 b(psi) = F(psi), b(D) = 0 on the displacement field.

    a is the Gram form K_D (interface Laplace-Beltrami plus elastic energy and
    solid mass), b(psi) = N_D . psi, the multiplier space is one-dimensional.
    """

    K_D: sp.csr_matrix
    N_D: np.ndarray

    @cached_property
    def matrix(self) -> sp.csc_matrix:
        n = sp.csr_matrix(self.N_D.reshape(-1, 1))
        return sp.bmat([[self.K_D, -n], [-n.T, None]], format="csc")

    @cached_property
    def factor(self) -> SparseFactor:
        return SparseFactor(self.matrix, "mixed displacement/multiplier system")

    @cached_property
    def K_D_factor(self) -> SparseFactor:
        return SparseFactor(self.K_D, "K_D", symmetric=True)

    def solve(self, load: np.ndarray, constraint: float = 0.0) -> Tuple[np.ndarray, complex]:
        """Solve for (D, c0) given the load F and the value of b(D)."""
        rhs = np.append(np.asarray(load), -constraint)
        x = self.factor.solve(rhs)
        return x[:-1], x[-1]


def build_saddle(forms: FormSet) -> SaddleProblem:
    return SaddleProblem(forms.K_D, forms.N_D)


def build_nullvector(forms: FormSet, layout: SpaceLayout, alpha: float = 1.0,
                     saddle: Optional[SaddleProblem] = None) -> NullspaceData:
    """
    Steady state from a(D, psi) = alpha <nu, psi>_{Gamma_s}.

    Args:
        forms: Assembled forms
        layout: Space layout
        alpha: Load scale; the state is linear in alpha

    Returns:
        NullspaceData
    """
    saddle = saddle or build_saddle(forms)
    try:
        base = saddle.K_D_factor.solve(forms.N_D)
    except SolverError as e:
        raise SolverError(f"Singular a-form in the nullvector problem: {e}") from e
    displacement = alpha * base
    state = StateVector(layout, np.zeros(layout.n_velocity), displacement)
    h_norm = float(np.sqrt(max(0.0, (forms.K_D @ displacement) @ displacement)))
    dual_norm = float(np.sqrt(forms.N_D @ base))
    logger.info(f"Nullvector built: alpha={alpha}, |phi_N|_H={h_norm:.6e}, |l|_H'={dual_norm:.6e}")
    return NullspaceData(float(alpha), state, forms.N_D, h_norm, dual_norm)


def in_complement(state: StateVector, nulldata: NullspaceData, forms: FormSet,
                  tol: float = COMPLEMENT_TOL) -> bool:
    """|l(Phi)| <= tol * |l|_H' * |Phi|_H."""
    norm = np.sqrt(max(0.0, np.real(energy_inner_product(state, state, forms))))
    return bool(abs(nulldata.evaluate(state)) <= tol * nulldata.dual_norm * max(norm, 1e-300))


def project_Nperp(state: StateVector, nulldata: NullspaceData, forms: FormSet) -> StateVector:
    """Phi - (<Phi, phi_N>_H / |phi_N|_H^2) phi_N."""
    if nulldata.h_norm == 0:
        return state.copy()
    coefficient = energy_inner_product(state, nulldata.state, forms) / nulldata.h_norm ** 2
    return state - nulldata.state * coefficient


def project_reduced(bundle: GeneratorBundle, x: np.ndarray, nulldata: NullspaceData) -> np.ndarray:
    """Reduced-coordinate version of :func:`project_Nperp`."""
    x_n = bundle.to_reduced(nulldata.state)
    return x - x_n * (bundle.inner(x, x_n) / nulldata.h_norm ** 2)


class DirichletMap:
    """
    Elastic-harmonic extension: div sigma(f) = 0 in the solid, f = g on Gamma_s.
    """

    def __init__(self, forms: FormSet):
        layout = forms.layout
        d = layout.dimension
        self.forms = forms
        self.layout = layout
        R = layout.restriction
        self.E = (R @ forms.E_s @ R.T).tocsr()
        trace = layout.trace_positions(layout.solid_nodes)
        self.boundary = vector_dofs(trace, d)
        self.interior = np.setdiff1d(np.arange(layout.n_w), self.boundary)
        self._factor = SparseFactor(self.E[self.interior][:, self.interior],
                                    "clamped elasticity", symmetric=True)

    def __call__(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g)
        f = np.zeros(self.layout.n_w, dtype=np.result_type(g, float))
        f[self.boundary] = g
        f[self.interior] = self._factor.solve(-(self.E[self.interior][:, self.boundary] @ g))
        return f

    def residual(self, f: np.ndarray) -> float:
        """Relative interior residual of <sigma(f), eps(v)>."""
        r = (self.E @ f)[self.interior]
        scale = abs(self.E).max() * max(np.abs(f).max(initial=0.0), 1e-300)
        return float(np.abs(r).max(initial=0.0) / scale)

    @cached_property
    def bound_constant(self) -> float:
        """sup |f|_{A_s} / |g|_{H1(Gamma_s)} over interface data."""
        layout, forms = self.layout, self.forms
        R = layout.restriction
        extension = np.column_stack([self(e) for e in np.eye(layout.n_h)])
        A_s = (R @ forms.A_s @ R.T).toarray()
        idofs = vector_dofs(layout.interface_nodes, layout.dimension)
        h1 = (forms.M_G + forms.S_G)[idofs][:, idofs].toarray()
        top = sla.eigh(extension.T @ A_s @ extension, h1, eigvals_only=True).max()
        return float(np.sqrt(top))


def dirichlet_map(forms: FormSet, g: np.ndarray) -> np.ndarray:
    """Structure field f with div sigma(f) = 0 and f|Gamma_s = g."""
    return DirichletMap(forms)(g)


def estimate_infsup(saddle: SaddleProblem) -> float:
    """
    Inf-sup constant of b on the a-norm: beta = sup_psi b(psi) / |psi|_a = sqrt(N^T K_D^-1 N).

    Raises:
        SolverError: beta below 1e-12
    """
    beta = float(np.sqrt(saddle.N_D @ saddle.K_D_factor.solve(saddle.N_D)))
    if beta < 1e-12:
        raise SolverError(f"Inf-sup constant {beta:.3e} is degenerate")
    logger.info(f"Inf-sup estimate: {beta:.6e}")
    return beta


def infsup_witness(forms: FormSet, sign: float = 1.0) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Witness pair for the inf-sup condition.

    Solves the interface problem Lap_G eta = sign * nu (means of eta pinned),
    extends eta elastically into the solid and evaluates b for r = sign.

    Returns:
        (eta, extension, value): interface field, structure field, b([eta, E eta], sign) > 0
    """
    layout = forms.layout
    d = layout.dimension
    idofs = vector_dofs(layout.interface_nodes, d)
    S = forms.S_G[idofs][:, idofs]
    M = forms.M_G[idofs][:, idofs]
    constants = M @ np.tile(np.eye(d), (layout.interface_nodes.size, 1))
    system = sp.bmat([[S, sp.csr_matrix(constants)], [sp.csr_matrix(constants.T), None]], format="csc")
    rhs = np.concatenate([-np.sign(sign) * forms.N_G[idofs], np.zeros(d)])
    eta = SparseFactor(system, "interface Laplace-Beltrami (pinned)").solve(rhs)[:idofs.size]
    extension = DirichletMap(forms)(eta)
    value = float(-np.sign(sign) * (forms.N_G[idofs] @ eta))
    return eta, extension, value


@dataclass(eq=False)
class ResolventSolution:
    state: StateVector
    reduced: np.ndarray
    q: np.ndarray               # mean-free pressure of the Stokes step
    c0: float                   # constant part of the pressure
    pressure: np.ndarray        # q + c0
    residual: float             # |A_h Phi - Phi*|_H / |Phi*|_H
    bound_constant: Optional[float] = None


class ZeroResolventSolver:
    """Factorizations for repeated solves of A_h Phi = Phi* on N-perp."""

    def __init__(self, bundle: GeneratorBundle, nulldata: NullspaceData,
                 saddle: Optional[SaddleProblem] = None, tol: float = COMPLEMENT_TOL):
        self.bundle = bundle
        self.nulldata = nulldata
        self.tol = tol
        layout, forms = bundle.layout, bundle.forms
        self.layout, self.forms = layout, forms
        self.saddle = saddle or build_saddle(forms)
        d = layout.dimension

        fluid_only = np.setdiff1d(np.setdiff1d(layout.fluid_nodes, layout.solid_nodes), layout.outer_nodes)
        self.open_dofs = vector_dofs(fluid_only, d)
        A_f = forms.A_f.tocsr()
        B = forms.B.tocsr()
        B_o = B[:, self.open_dofs]
        m_p = (forms.M_p @ np.ones(layout.n_p)).reshape(-1, 1)
        self._A_f = A_f
        self._B = B
        self._m_p = m_p
        stokes = sp.bmat([
            [A_f[self.open_dofs][:, self.open_dofs], -B_o.T, None],
            [B_o, None, sp.csr_matrix(m_p)],
            [None, sp.csr_matrix(m_p.T), None],
        ], format="csc")
        self._stokes = SparseFactor(stokes, "Stokes system (mean-free pressure)")
        logger.info(f"Zero-resolvent solver: {self.open_dofs.size} open fluid dofs, "
                    f"{layout.n_p} pressure dofs")

    def solve(self, target: StateVector, check_complement: bool = True) -> ResolventSolution:
        """
        Solve A_h Phi = Phi* for Phi in N-perp.

        Raises:
            NotInComplementError: l(Phi*) exceeds the complement tolerance
        """
        bundle, forms, layout = self.bundle, self.forms, self.layout
        if check_complement and not in_complement(target, self.nulldata, forms, self.tol):
            raise NotInComplementError(
                f"Input not in N-perp: |l(Phi*)|={abs(self.nulldata.evaluate(target)):.3e}")

        x_star = bundle.to_reduced(target)
        V_star = bundle.reducer.lift(x_star[:bundle.n_fluid])
        D_star = target.displacement
        dtype = np.result_type(V_star, D_star, float)
        R = layout.restriction

        # Stokes step: velocity prescribed on the solid closure (h1 = h0*, w1 = w0*)
        V = np.asarray(R.T @ D_star, dtype=dtype)
        o = self.open_dofs
        rhs = np.concatenate([
            -(forms.M_V @ V_star)[o] - (self._A_f @ V)[o],
            -(self._B @ V),
            np.zeros(1),
        ])
        sol = self._stokes.solve(rhs)
        V[o] = sol[:o.size]
        q = sol[o.size:o.size + layout.n_p]
        kappa = sol[-1]
        if abs(kappa) > 1e-8 * max(1.0, np.abs(q).max(initial=0.0)):
            logger.debug(f"Stokes compatibility multiplier {kappa:.3e}")

        # Mixed step for the displacement and the pressure constant
        load = R @ (-(self._A_f @ V) - forms.M_V @ V_star + self._B.T @ q)
        D, c0 = self.saddle.solve(load)

        state = StateVector(layout, V, D)
        x = bundle.to_reduced(state)
        star_norm = bundle.norm(x_star)
        residual = bundle.norm(bundle.apply_reduced(x) - x_star) / star_norm if star_norm > 0 else \
            bundle.norm(bundle.apply_reduced(x))
        c0 = complex(c0) if np.iscomplexobj(c0) else float(c0)
        return ResolventSolution(state, x, q, c0, q + c0, float(residual))

    @cached_property
    def bound_constant(self) -> float:
        """sup over N-perp of |A_h^-1 Phi*|_H / |Phi*|_H."""
        return resolvent_bound_at_zero(self.bundle, self.nulldata)


def resolvent_bound_at_zero(bundle: GeneratorBundle, nulldata: NullspaceData) -> float:
    """Norm of the inverse of A_h restricted to N-perp, in the energy norm."""
    n_hat = bundle.to_whitened(bundle.to_reduced(nulldata.state))
    n_hat = n_hat / np.linalg.norm(n_hat)
    return resolvent_norm(bundle.whitened(), 0.0, border=n_hat)


def solve_resolvent_at_zero(bundle: GeneratorBundle, nulldata: NullspaceData, target: StateVector,
                            tol: float = COMPLEMENT_TOL, with_bound: bool = False) -> ResolventSolution:
    """One-shot solve of A_h Phi = Phi* on N-perp (see :class:`ZeroResolventSolver`)."""
    solver = ZeroResolventSolver(bundle, nulldata, tol=tol)
    solution = solver.solve(target)
    if with_bound:
        solution.bound_constant = solver.bound_constant
    logger.info(f"Resolvent at zero: residual={solution.residual:.3e}, c0={solution.c0}")
    return solution
