"""
Elimination of the fluid pressure.

Two routes are provided. The Leray route reduces the momentum equation to
the discretely divergence-free velocities (basis Z, orthonormal in the
velocity mass) and recovers the pressure as the Lagrange multiplier of the
divergence constraint. The harmonic route solves discrete Laplace problems
for the pressure maps P1(u), P2(h), P3(w) with second-derivative boundary
data on the interface and on the outer boundary.
"""
import logging
from typing import Callable, Dict, Mapping, Optional, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from utils.errors import DimensionError, SolverError
from utils.fem import FormSet, SpaceLayout, cell_derivatives_at, facet_quadrature, vector_dofs
from utils.linalg import SparseFactor
from utils.mesh import interface_frame, outer_boundary_frame
from utils.quadrature import p2_values

logger = logging.getLogger(__name__)

PRESSURE_BCS = ("dirichlet", "robin")


def _split_solve(solve, rhs):
    if np.iscomplexobj(rhs):
        return solve(rhs.real) + 1j * solve(rhs.imag)
    return solve(rhs)


class LerayReducer:
    """
    Divergence-free velocity basis and pressure lifting.

    Attributes:
        Z: Basis (n_velocity x m) of {V : B V = 0, V|Gamma_f = 0}, Z^T M_V Z = I
        rank: Numerical rank of the divergence matrix on free velocities
    """

    def __init__(self, forms: FormSet, Z: np.ndarray, rank: int):
        self.forms = forms
        self.layout = forms.layout
        self.Z = Z
        self.rank = rank

        free = self.layout.free_velocity
        self._free = free
        self._B_free = forms.B[:, free].tocsr()
        self._mass = SparseFactor(forms.M_V[free][:, free], "free velocity mass", symmetric=True)
        self._minv_bt = self._mass.solve(self._B_free.T.toarray())
        self._schur = sla.cho_factor(self._B_free @ self._minv_bt)

    @property
    def dimension(self) -> int:
        return self.Z.shape[1]

    def to_reduced(self, velocity: np.ndarray) -> np.ndarray:
        """M_V-orthogonal coordinates of a velocity field on range Z."""
        return self.Z.T @ (self.forms.M_V @ velocity)

    def lift(self, y: np.ndarray) -> np.ndarray:
        return self.Z @ y

    def divergence_residual(self) -> float:
        return float(np.abs(self.forms.B @ self.Z).max(initial=0.0))

    def static_forces(self, velocity: np.ndarray, displacement: np.ndarray) -> np.ndarray:
        """A_f V + R^T K_D D: viscous and elastic forces in velocity numbering."""
        R = self.layout.restriction
        return self.forms.A_f @ velocity + R.T @ (self.forms.K_D @ displacement)

    def recover_pressure(self, velocity: np.ndarray, displacement: np.ndarray) -> np.ndarray:
        """
        Lagrange-multiplier pressure of the divergence constraint.

        Solves (B M^-1 B^T) p = B M^-1 (A_f V + R^T K_D D) on free velocities.
        """
        forces = self.static_forces(velocity, displacement)[self._free]
        rhs = self._B_free @ self._mass.solve(forces)
        return _split_solve(lambda b: sla.cho_solve(self._schur, b), rhs)

    def momentum_rate(self, velocity: np.ndarray, displacement: np.ndarray):
        """
        Velocity rate of the full momentum equation and its pressure.

        Returns:
            (rate, p): M_V rate = -A_f V - R^T K_D D + B^T p on free dofs, zero on GAMMA_F
        """
        p = self.recover_pressure(velocity, displacement)
        forces = -self.static_forces(velocity, displacement) + self.forms.B.T @ p
        rate = np.zeros(self.layout.n_velocity, dtype=forces.dtype)
        rate[self._free] = self._mass.solve(forces[self._free])
        return rate, p

    def consistent_pressure_operators(self) -> Dict[str, np.ndarray]:
        """
        Algebraic pressure maps P1 (of V), P2 and P3 (of D) with p = P1 V + (P2 + P3) D.

        Returns:
            dict: dense matrices ``P1`` (n_p x n_velocity), ``P2``, ``P3`` (n_p x n_displacement)
        """
        forms, R = self.forms, self.layout.restriction

        def lift(forces):
            rhs = self._B_free @ self._mass.solve(forces[self._free].toarray()
                                                  if sp.issparse(forces) else forces[self._free])
            return sla.cho_solve(self._schur, rhs)

        P1 = lift(forms.A_f)
        P2 = lift(R.T @ (R @ forms.S_G @ R.T))
        P3 = lift(R.T @ (R @ forms.A_s @ R.T))
        return {"P1": P1, "P2": P2, "P3": P3}

    def explicit_generator(self, maps: Optional["PressureMaps"] = None) -> np.ndarray:
        """
        Generator on (free velocities, displacement) with the pressure substituted.

        M V' = -A_f V - R^T K_D D + B^T p(V, D), D' = R V, where p is the
        harmonic pressure P1(u) + P2(h) + P3(w) of ``maps``. Without maps the
        algebraic lifts of ``consistent_pressure_operators`` are used and the
        rate is exactly divergence free.

        Returns:
            np.ndarray: dense matrix of size (n_free + n_displacement)^2
        """
        forms, R, free = self.forms, self.layout.restriction, self._free
        n_d = R.shape[0]
        if maps is None:
            lifts = self.consistent_pressure_operators()
            p_velocity = lifts["P1"][:, free]
            p_displacement = lifts["P2"] + lifts["P3"]
        else:
            unit = np.zeros((self.layout.n_velocity, free.size))
            unit[free, np.arange(free.size)] = 1.0
            p_velocity = maps.field_pressure(unit, np.zeros((n_d, free.size)))
            p_displacement = maps.field_pressure(np.zeros((self.layout.n_velocity, n_d)), np.eye(n_d))
        Bt = self._B_free.T.toarray()
        velocity_rows = -forms.A_f[free][:, free].toarray() + Bt @ p_velocity
        coupling = -(R.T @ forms.K_D)[free].toarray() + Bt @ p_displacement
        top = self._mass.solve(np.hstack([velocity_rows, coupling]))
        bottom = np.hstack([R[:, free].toarray(), np.zeros((n_d, n_d))])
        return np.vstack([top, bottom])

    def compress(self, operator: np.ndarray) -> np.ndarray:
        """
        Galerkin compression of a (free velocity, displacement) operator to (y, D).

        Velocity rates are read back through Z^T M_V, displacements pass unchanged.
        """
        free = self._free
        n_free = free.size
        Z_free = self.Z[free]
        M_free = self.forms.M_V[free][:, free]
        left = np.vstack([np.asarray((M_free @ Z_free).T @ operator[:n_free]), operator[n_free:]])
        return np.hstack([left[:, :n_free] @ Z_free, left[:, n_free:]])


def build_leray(layout: SpaceLayout, forms: FormSet) -> LerayReducer:
    """
    Build the divergence-free basis from a dense SVD of the free divergence matrix.

    Raises:
        SolverError: rank deficiency beyond a one-dimensional pressure kernel
    """
    free = layout.free_velocity
    B_free = forms.B[:, free].toarray()
    _, s, Vh = sla.svd(B_free, full_matrices=True)
    tol = s.max() * max(B_free.shape) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    if rank < layout.n_p - 1:
        raise SolverError(f"Divergence matrix has rank {rank} < n_p - 1 = {layout.n_p - 1}; "
                          f"velocity/pressure pair is not inf-sup stable")
    if rank == layout.n_p - 1:
        logger.info("Divergence matrix has a one-dimensional pressure kernel")

    Z0 = Vh[rank:].T
    M_free = forms.M_V[free][:, free]
    gram = Z0.T @ (M_free @ Z0)
    L = sla.cholesky(gram, lower=True)
    Z_free = sla.solve_triangular(L, Z0.T, lower=True).T

    Z = np.zeros((layout.n_velocity, Z_free.shape[1]))
    Z[free] = Z_free
    reducer = LerayReducer(forms, Z, rank)
    logger.info(f"Leray reduction: free velocity dofs={free.size}, rank(B)={rank}, "
                f"divergence-free dimension={reducer.dimension}, "
                f"|B Z|_max={reducer.divergence_residual():.2e}")
    return reducer


def reduce_to_divfree(blocks: Union[Mapping, np.ndarray, sp.spmatrix], reducer: LerayReducer,
                      kind: str = "form"):
    """
    Project velocity rows/columns of operator blocks onto range Z.

    Args:
        blocks: A matrix or a mapping of named matrices; every side of size
            n_velocity is reduced
        reducer: Leray reducer
        kind: ``form`` (bilinear form, Z^T A Z) or ``operator`` (map on
            velocities, Z^T M_V T Z)

    Returns:
        Reduced dense block(s), same container shape as ``blocks``
    """
    if isinstance(blocks, Mapping):
        return {name: reduce_to_divfree(block, reducer, kind) for name, block in blocks.items()}
    if kind not in ("form", "operator"):
        raise ValueError(f"Unknown block kind: {kind}")

    n = reducer.layout.n_velocity
    Z = reducer.Z
    shape = blocks.shape
    rows, cols = shape[0] == n, len(shape) > 1 and shape[1] == n
    if not rows and not cols:
        raise DimensionError("velocity block", n, shape)

    if kind == "operator":
        if not (rows and cols):
            raise DimensionError("velocity operator", (n, n), shape)
        return Z.T @ (reducer.forms.M_V @ np.asarray(blocks @ Z))
    result = blocks
    if cols:
        result = np.asarray(result @ Z)
    if rows:
        result = np.asarray((Z.T @ result) if not sp.issparse(result) else (result.T @ Z).T)
    return result


class PressureMaps:
    """
    Harmonic pressure maps built from discrete Laplace problems on the fluid.

    Boundary data on GAMMA_S are L2-projected onto continuous P1 traces:
    P1: div(grad u + grad^T u).nu + ((grad u + grad^T u) nu).nu,
    P2: -Lap_G(h).nu, P3: -(nu.sigma(w)).nu; on GAMMA_F only P1 has Neumann
    data div(grad u + grad^T u).n. With ``dirichlet`` the condition on GAMMA_S
    is p = data. With ``robin`` it is p + dp/dnu = data, the condition the
    momentum and interface equations impose on the pressure; only this
    variant converges to the Lagrange-multiplier pressure.
    """

    def __init__(self, layout: SpaceLayout, forms: FormSet, bc: str = "dirichlet"):
        if bc not in PRESSURE_BCS:
            raise ValueError(f"Unknown pressure boundary condition: {bc}. Supported: {list(PRESSURE_BCS)}")
        self.layout = layout
        self.forms = forms
        self.bc = bc
        mesh = layout.mesh
        self._iface = interface_frame(mesh)
        self._outer = outer_boundary_frame(mesh)

        pidx = layout.pressure_index
        self.gamma_vertices = np.unique(pidx[self._iface.facets])
        self.outer_vertices = np.unique(pidx[self._outer.facets])
        on_boundary = np.zeros(layout.n_p, dtype=bool)
        on_boundary[self.gamma_vertices] = True
        self.dirichlet_free = np.flatnonzero(~on_boundary)
        on_boundary[self.outer_vertices] = True
        self.interior_vertices = np.flatnonzero(~on_boundary)

        self._assemble_boundary_operators()

        L = forms.L_p.tocsr()
        if bc == "dirichlet":
            self._solver = SparseFactor(L[self.dirichlet_free][:, self.dirichlet_free],
                                        "pressure Laplacian (Dirichlet)", symmetric=True)
        else:
            self._solver = SparseFactor(L + self.gamma_mass, "pressure Laplacian (Robin)", symmetric=True)
        g = self.gamma_vertices
        self._gamma_projection = SparseFactor(self.gamma_mass[g][:, g], "interface pressure mass",
                                              symmetric=True)
        logger.info(f"Pressure maps ({bc}): {g.size} interface vertices, "
                    f"{self.interior_vertices.size} interior vertices")

    def _load(self, frame, lam, jw, data, cells) -> sp.csr_matrix:
        """Sparse n_p x n_velocity matrix int psi_k data_(a,c) over the facets of ``frame``."""
        d = self.layout.dimension
        pidx = self.layout.pressure_index[frame.facets]
        local = np.einsum("fq,qk,fqac->fkac", jw, lam, data).reshape(len(cells), d, -1)
        dofs = (d * self.layout.cell_nodes[cells][:, :, None] + np.arange(d)).reshape(len(cells), -1)
        rows = np.repeat(pidx[:, :, None], dofs.shape[1], axis=2)
        cols = np.repeat(dofs[:, None, :], d, axis=1)
        return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                             shape=(self.layout.n_p, self.layout.n_velocity)).tocsr()

    def _assemble_boundary_operators(self):
        layout, forms = self.layout, self.forms
        d = layout.dimension
        n_p = layout.n_p

        # Interface: P1 trace mass and data loads
        frame = self._iface
        lam, jw, xq = facet_quadrature(self.layout.mesh, frame.facets)
        nu = frame.normals
        pidx = layout.pressure_index[frame.facets]
        mass_local = np.einsum("fq,qk,ql->fkl", jw, lam, lam)
        rows = np.repeat(pidx[:, :, None], d, axis=2)
        cols = np.repeat(pidx[:, None, :], d, axis=1)
        self.gamma_mass = sp.coo_matrix((mass_local.ravel(), (rows.ravel(), cols.ravel())),
                                        shape=(n_p, n_p)).tocsr()

        grads, hess = cell_derivatives_at(self.layout, frame.fluid_cells, xq)
        normal_derivative = np.einsum("fqad,fd->fqa", grads, nu)
        trace_hess = np.trace(hess, axis1=2, axis2=3)
        h_nu = np.einsum("faic,fi->fac", hess, nu)
        data_u = (np.einsum("fc,fa->fac", nu, trace_hess) + h_nu)[:, None, :, :] \
            + 2 * np.einsum("fc,fqa->fqac", nu, normal_derivative)
        self.load_u = self._load(frame, lam, jw, data_u, frame.fluid_cells)

        grads, _ = cell_derivatives_at(self.layout, frame.solid_cells, xq)
        normal_derivative = np.einsum("fqad,fd->fqa", grads, nu)
        data_w = -(2 * forms.mu * np.einsum("fc,fqa->fqac", nu, normal_derivative) + forms.lam * grads)
        self.load_w = self._load(frame, lam, jw, data_w, frame.solid_cells)

        # -Lap_G(h).nu with Lap_G h = -M_G^-1 S_G h on the interface dofs
        facet_nodes = layout.interface_facet_nodes
        phi = p2_values(lam)
        local = np.einsum("fq,qk,qb,fc->fkbc", jw, lam, phi, nu).reshape(len(facet_nodes), d, -1)
        dofs = (d * facet_nodes[:, :, None] + np.arange(d)).reshape(len(facet_nodes), -1)
        C = sp.coo_matrix((local.ravel(),
                           (np.repeat(pidx[:, :, None], dofs.shape[1], axis=2).ravel(),
                            np.repeat(dofs[:, None, :], d, axis=1).ravel())),
                          shape=(n_p, layout.n_velocity)).tocsr()
        idofs = vector_dofs(layout.interface_nodes, d)
        mass = forms.M_G[idofs][:, idofs]
        lap = SparseFactor(mass, "interface mass", symmetric=True).solve(forms.S_G[idofs][:, idofs].toarray())
        load_h = np.zeros((n_p, layout.n_velocity))
        load_h[:, idofs] = C[:, idofs] @ lap
        self.load_h = load_h

        # Outer boundary: Neumann data of P1
        frame = self._outer
        lam, jw, xq = facet_quadrature(self.layout.mesh, frame.facets)
        _, hess = cell_derivatives_at(self.layout, frame.fluid_cells, xq)
        n = frame.normals
        trace_hess = np.trace(hess, axis1=2, axis2=3)
        data_f = (np.einsum("fc,fa->fac", n, trace_hess) + np.einsum("faic,fi->fac", hess, n))
        data_f = np.broadcast_to(data_f[:, None], (len(frame.facets), lam.shape[0]) + data_f.shape[1:])
        self.neumann_u = self._load(frame, lam, jw, data_f, frame.fluid_cells)

    def gamma_values(self, load: np.ndarray) -> np.ndarray:
        """L2 projection of an interface load onto P1 nodal values (zero off GAMMA_S)."""
        load = np.asarray(load)
        g = self.gamma_vertices
        values = np.zeros(load.shape, dtype=np.result_type(load, float))
        values[g] = self._gamma_projection.solve(load[g])
        return values

    def harmonic_extension(self, gamma_values: np.ndarray, neumann_load=None) -> np.ndarray:
        """
        Discrete harmonic pressure with the given interface data.

        Args:
            gamma_values: P1 nodal values of the interface data (entries off
                GAMMA_S ignored); a matrix is treated column by column
            neumann_load: Optional load of the GAMMA_F Neumann data

        Returns:
            np.ndarray: pressure at fluid vertices
        """
        gamma_values = np.asarray(gamma_values)
        dtype = np.result_type(gamma_values, float if neumann_load is None else neumann_load)
        if neumann_load is None:
            neumann = np.zeros(gamma_values.shape, dtype)
        else:
            neumann = np.asarray(neumann_load, dtype)
        g = np.zeros(gamma_values.shape, dtype)
        g[self.gamma_vertices] = gamma_values[self.gamma_vertices]
        if self.bc == "robin":
            return self._solver.solve(self.gamma_mass @ g + neumann)
        p = g.copy()
        f = self.dirichlet_free
        rhs = neumann[f] - (self.forms.L_p @ g)[f]
        p[f] = self._solver.solve(rhs)
        return p

    def apply_components(self, u_field: np.ndarray, h_field: np.ndarray, w_field: np.ndarray) -> Dict[str, np.ndarray]:
        """P1(u), P2(h), P3(w) for fields given in velocity numbering (columns allowed)."""
        return {
            "P1": self.harmonic_extension(self.gamma_values(self.load_u @ u_field), self.neumann_u @ u_field),
            "P2": self.harmonic_extension(self.gamma_values(self.load_h @ h_field)),
            "P3": self.harmonic_extension(self.gamma_values(self.load_w @ w_field)),
        }

    def field_pressure(self, velocity: np.ndarray, displacement: np.ndarray) -> np.ndarray:
        """
        Harmonic pressure of a velocity field and a displacement.

        The interface displacement h is the trace of the structure
        displacement, so both P2 and P3 read the same field.
        """
        w_field = self.layout.restriction.T @ displacement
        parts = self.apply_components(velocity, w_field, w_field)
        return parts["P1"] + parts["P2"] + parts["P3"]

    def _scalar_load(self, frame, func: Callable) -> np.ndarray:
        lam, jw, xq = facet_quadrature(self.layout.mesh, frame.facets)
        values = np.asarray(func(xq, frame.normals))
        if values.shape != jw.shape:
            raise DimensionError("boundary data", jw.shape, values.shape)
        local = np.einsum("fq,qk,fq->fk", jw, lam, values)
        pidx = self.layout.pressure_index[frame.facets]
        return np.bincount(pidx.ravel(), weights=local.ravel(), minlength=self.layout.n_p)

    def interface_data(self, func: Callable) -> np.ndarray:
        """
        P1 interface values of boundary data given as a function.

        Args:
            func: ``func(points, normals)`` with points (nf, q, d) on GAMMA_S
                facets and facet normals (nf, d) out of the fluid; returns (nf, q)
        """
        return self.gamma_values(self._scalar_load(self._iface, func))

    def outer_load(self, func: Callable) -> np.ndarray:
        """Neumann load on GAMMA_F of data ``func(points, normals)``, normals out of the fluid."""
        return self._scalar_load(self._outer, func)

    def robin_trace(self, p: np.ndarray) -> np.ndarray:
        """
        Discrete p + dp/dnu at the GAMMA_S vertices.

        The normal derivative is the weak one, M_G^-1 (L_p p) restricted to
        GAMMA_S, exact for discretely harmonic p.
        """
        g = self.gamma_vertices
        p = np.asarray(p)
        return p[g] + self._gamma_projection.solve((self.forms.L_p @ p)[g])

    def harmonic_residual(self, p: np.ndarray, rms: bool = False) -> float:
        """
        Relative discrete Laplace residual at vertices off both boundaries.

        The largest residual by default, the root-mean-square with ``rms``;
        both are scaled by max|L_p| max|p|.
        """
        residual = np.abs((self.forms.L_p @ p)[self.interior_vertices])
        scale = abs(self.forms.L_p).max() * max(np.abs(p).max(initial=0.0), 1e-300)
        if rms:
            value = np.sqrt(np.mean(residual ** 2)) if residual.size else 0.0
        else:
            value = residual.max(initial=0.0)
        return float(value / scale)


def build_pressure_maps(layout: SpaceLayout, forms: FormSet, bc: str = "dirichlet") -> PressureMaps:
    return PressureMaps(layout, forms, bc)


def apply_pressure_maps(maps: PressureMaps, u: np.ndarray, h0: np.ndarray, w0: np.ndarray) -> np.ndarray:
    """
    Pressure p = P1(u) + P2(h0) + P3(w0) from the state blocks.

    Args:
        maps: Pressure maps
        u: Fluid velocity block (n_u)
        h0: Interface displacement block (n_h)
        w0: Structure displacement block (n_w)
    """
    layout = maps.layout
    d = layout.dimension
    for name, block, size in [("u", u, layout.n_u), ("h0", h0, layout.n_h), ("w0", w0, layout.n_w)]:
        if np.asarray(block).shape != (size,):
            raise DimensionError(f"block {name}", size, np.asarray(block).shape)
    dtype = np.result_type(u, h0, w0, float)
    u_field = np.zeros(layout.n_velocity, dtype)
    u_field[vector_dofs(layout.fluid_nodes, d)] = u
    h_field = np.zeros(layout.n_velocity, dtype)
    h_field[vector_dofs(layout.interface_nodes, d)] = h0
    w_field = layout.restriction.T @ np.asarray(w0, dtype)
    parts = maps.apply_components(u_field, h_field, w_field)
    return parts["P1"] + parts["P2"] + parts["P3"]


def pressure_discrepancy(forms: FormSet, p: np.ndarray, reference: np.ndarray) -> float:
    """
    Relative L2(Omega_f) distance of two pressures after removing their means.

    Returns:
        float: ||(p - mean p) - (r - mean r)|| / ||r - mean r|| in the pressure mass
    """
    M = forms.M_p
    ones = np.ones(M.shape[0])
    volume = ones @ (M @ ones)

    def centred(q):
        q = np.asarray(q)
        return q - (ones @ (M @ q)) / volume

    diff, ref = centred(p) - centred(reference), centred(reference)
    norm = np.sqrt(abs(np.vdot(ref, M @ ref)))
    if norm == 0.0:
        raise SolverError("Reference pressure is constant; relative distance undefined")
    return float(np.sqrt(abs(np.vdot(diff, M @ diff))) / norm)
