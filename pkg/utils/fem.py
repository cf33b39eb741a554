"""
Discrete finite-energy space and bilinear forms of the coupled system.

Every vector field is continuous P2 on the simplices of the mesh, so fluid,
interface and structure traces share nodes. A state is stored on two nodal
fields: the velocity field V (fluid velocity u, interface velocity h1 and
structure velocity w1 are its restrictions) and the displacement field D on
the closure of the solid (h0 and w0). The pressure is P1 on fluid vertices.

Vector degrees of freedom are numbered ``d * node + component``; nodes are
the mesh vertices followed by one node per mesh edge.
"""
import logging
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Optional

import numpy as np
import scipy.io
import scipy.sparse as sp

from utils.errors import DimensionError, MeshError
from utils.mesh import FLUID, GAMMA_F, GAMMA_S, SOLID, Mesh, interface_frame
from utils.quadrature import (
    barycentric,
    facet_geometry,
    local_edges,
    p2_gradients,
    p2_hessians,
    p2_values,
    simplex_geometry,
    simplex_quadrature,
)

logger = logging.getLogger(__name__)

QUADRATURE_DEGREE = 4


def vector_dofs(nodes: np.ndarray, d: int) -> np.ndarray:
    """Vector degrees of freedom of ``nodes`` in node-major order."""
    nodes = np.asarray(nodes, dtype=np.int64)
    return (d * nodes[:, None] + np.arange(d)).ravel()


def _edge_table(mesh: Mesh):
    d = mesh.dimension
    pairs = local_edges(d)
    local = np.stack([np.sort(mesh.cells[:, list(p)], axis=1) for p in pairs], axis=1)
    edges = np.unique(local.reshape(-1, 2), axis=0)
    keys = edges[:, 0] * mesh.n_vertices + edges[:, 1]
    cell_edges = np.searchsorted(keys, local[..., 0] * mesh.n_vertices + local[..., 1])
    return edges, keys, cell_edges


@dataclass(frozen=True, eq=False)
class SpaceLayout:
    """
    Index maps of the discrete energy space.

    Attributes:
        mesh: Underlying mesh
        edges: Global edges (n_edges, 2), one P2 node each
        cell_nodes: P2 nodes of every cell (n_cells, n_local)
        interface_facet_nodes: P2 nodes of every GAMMA_S facet
        fluid_nodes, solid_nodes, interface_nodes, outer_nodes: sorted node sets
        pressure_vertices: fluid vertices carrying the P1 pressure
        free_velocity: velocity dofs not on GAMMA_F
        displacement_dofs: velocity-numbered dofs of the displacement field
    """

    mesh: Mesh
    edges: np.ndarray
    cell_nodes: np.ndarray
    interface_facet_nodes: np.ndarray
    fluid_nodes: np.ndarray
    solid_nodes: np.ndarray
    interface_nodes: np.ndarray
    outer_nodes: np.ndarray
    pressure_vertices: np.ndarray
    free_velocity: np.ndarray
    essential_velocity: np.ndarray
    displacement_dofs: np.ndarray

    @property
    def dimension(self) -> int:
        return self.mesh.dimension

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_vertices + self.edges.shape[0]

    @property
    def n_velocity(self) -> int:
        return self.dimension * self.n_nodes

    @property
    def n_displacement(self) -> int:
        return self.displacement_dofs.size

    @property
    def n_u(self) -> int:
        return self.dimension * self.fluid_nodes.size

    @property
    def n_p(self) -> int:
        return self.pressure_vertices.size

    @property
    def n_h(self) -> int:
        return self.dimension * self.interface_nodes.size

    @property
    def n_w(self) -> int:
        return self.dimension * self.solid_nodes.size

    @cached_property
    def node_coordinates(self) -> np.ndarray:
        """Vertices followed by edge midpoints."""
        v = self.mesh.vertices
        return np.vstack([v, 0.5 * (v[self.edges[:, 0]] + v[self.edges[:, 1]])])

    @cached_property
    def restriction(self) -> sp.csr_matrix:
        """R: velocity field -> displacement-field nodes (n_D x n_V)."""
        n = self.n_displacement
        return sp.csr_matrix(
            (np.ones(n), (np.arange(n), self.displacement_dofs)),
            shape=(n, self.n_velocity),
        )

    @cached_property
    def pressure_index(self) -> np.ndarray:
        """Map vertex -> pressure index (-1 off the fluid)."""
        index = np.full(self.mesh.n_vertices, -1, dtype=np.int64)
        index[self.pressure_vertices] = np.arange(self.n_p)
        return index

    def trace_positions(self, nodes: np.ndarray) -> np.ndarray:
        """Positions of interface nodes inside the sorted node set ``nodes``."""
        pos = np.searchsorted(nodes, self.interface_nodes)
        if np.any(pos >= nodes.size) or np.any(nodes[np.minimum(pos, nodes.size - 1)] != self.interface_nodes):
            raise MeshError("Interface trace mismatch: interface node missing from a trace space")
        return pos

    def interpolate(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Nodal interpolant of a vector function on the whole mesh (velocity numbering)."""
        values = np.asarray(func(self.node_coordinates), dtype=float)
        if values.shape != (self.n_nodes, self.dimension):
            raise DimensionError("interpolated field", (self.n_nodes, self.dimension), values.shape)
        return values.reshape(-1)


def build_layout(mesh: Mesh) -> SpaceLayout:
    """
    Build the P2/P1 layout with shared interface nodes.

    Args:
        mesh: Valid two-region mesh

    Returns:
        SpaceLayout: index maps and counts
    """
    d = mesh.dimension
    nv = mesh.n_vertices
    edges, keys, cell_edges = _edge_table(mesh)
    cell_nodes = np.hstack([mesh.cells, nv + cell_edges])

    def facet_nodes(facets):
        if facets.shape[0] == 0:
            return np.zeros((0, d + len(local_edges(d - 1))), dtype=np.int64)
        pairs = local_edges(d - 1)
        local = np.stack([np.sort(facets[:, list(p)], axis=1) for p in pairs], axis=1)
        query = local[..., 0] * nv + local[..., 1]
        ids = np.searchsorted(keys, query)
        ids = np.minimum(ids, keys.size - 1)
        if np.any(keys[ids] != query):
            raise MeshError("Interface trace mismatch: facet edge is not a mesh edge")
        return np.hstack([facets, nv + ids])

    interface_facet_nodes = facet_nodes(mesh.facets_of(GAMMA_S))
    outer_facet_nodes = facet_nodes(mesh.facets_of(GAMMA_F))

    fluid_nodes = np.unique(cell_nodes[mesh.cell_tags == FLUID])
    solid_nodes = np.unique(cell_nodes[mesh.cell_tags == SOLID])
    interface_nodes = np.unique(interface_facet_nodes)
    outer_nodes = np.unique(outer_facet_nodes)

    shared = np.intersect1d(fluid_nodes, solid_nodes)
    if not np.array_equal(shared, interface_nodes):
        raise MeshError("Interface trace mismatch: fluid and solid spaces share nodes off GAMMA_S")

    pressure_vertices = np.unique(mesh.cells[mesh.cell_tags == FLUID])
    essential = vector_dofs(outer_nodes, d)
    free = np.setdiff1d(np.arange(d * (nv + edges.shape[0])), essential)

    layout = SpaceLayout(
        mesh=mesh,
        edges=edges,
        cell_nodes=cell_nodes,
        interface_facet_nodes=interface_facet_nodes,
        fluid_nodes=fluid_nodes,
        solid_nodes=solid_nodes,
        interface_nodes=interface_nodes,
        outer_nodes=outer_nodes,
        pressure_vertices=pressure_vertices,
        free_velocity=free,
        essential_velocity=essential,
        displacement_dofs=vector_dofs(solid_nodes, d),
    )
    layout.trace_positions(fluid_nodes)
    layout.trace_positions(solid_nodes)
    logger.info(f"Layout: n_u={layout.n_u}, n_p={layout.n_p}, n_h={layout.n_h}, "
                f"n_w={layout.n_w}, essential velocity dofs={essential.size}")
    return layout


class StateVector:
    """
    Discrete state [u, h0, h1, w0, w1] stored on shared nodal fields.

    The five blocks are views of two arrays, so the trace identities
    h0 = w0|Gamma_s and u|Gamma_s = h1 = w1|Gamma_s hold by construction.
    """

    def __init__(self, layout: SpaceLayout, velocity: np.ndarray, displacement: np.ndarray):
        velocity = np.asarray(velocity)
        displacement = np.asarray(displacement)
        if velocity.shape != (layout.n_velocity,):
            raise DimensionError("velocity field", layout.n_velocity, velocity.shape)
        if displacement.shape != (layout.n_displacement,):
            raise DimensionError("displacement field", layout.n_displacement, displacement.shape)
        self.layout = layout
        self.velocity = velocity
        self.displacement = displacement

    @classmethod
    def zeros(cls, layout: SpaceLayout, dtype=float) -> "StateVector":
        return cls(layout, np.zeros(layout.n_velocity, dtype), np.zeros(layout.n_displacement, dtype))

    @classmethod
    def from_blocks(cls, layout: SpaceLayout, u, h0, h1, w0, w1, atol: float = 1e-12) -> "StateVector":
        """
        Assemble a state from the five blocks, checking the shared traces.

        Raises:
            DimensionError: block sizes do not match the layout
            ValueError: traces disagree (state outside the discrete domain)
        """
        d = layout.dimension
        sizes = {"u": layout.n_u, "h0": layout.n_h, "h1": layout.n_h, "w0": layout.n_w, "w1": layout.n_w}
        blocks = {"u": u, "h0": h0, "h1": h1, "w0": w0, "w1": w1}
        for name, block in blocks.items():
            if np.asarray(block).shape != (sizes[name],):
                raise DimensionError(f"block {name}", sizes[name], np.asarray(block).shape)

        dtype = np.result_type(*[np.asarray(b) for b in blocks.values()], float)
        velocity = np.zeros(layout.n_velocity, dtype)
        velocity[vector_dofs(layout.fluid_nodes, d)] = u
        velocity[vector_dofs(layout.solid_nodes, d)] = w1
        state = cls(layout, velocity, np.asarray(w0, dtype=dtype).copy())

        scale = max(1.0, max(np.abs(np.asarray(b)).max(initial=0.0) for b in blocks.values()))
        for name, expected, actual in [
            ("u|Gamma_s", h1, state.trace_of(u, layout.fluid_nodes)),
            ("w1|Gamma_s", h1, state.trace_of(w1, layout.solid_nodes)),
            ("w0|Gamma_s", h0, state.h0),
        ]:
            if np.abs(np.asarray(expected) - actual).max(initial=0.0) > atol * scale:
                raise ValueError(f"Trace mismatch: {name} differs from the interface field")
        return state

    def trace_of(self, block: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        return np.asarray(block)[vector_dofs(self.layout.trace_positions(nodes), self.layout.dimension)]

    @property
    def dtype(self):
        return np.result_type(self.velocity, self.displacement)

    @property
    def u(self) -> np.ndarray:
        return self.velocity[vector_dofs(self.layout.fluid_nodes, self.layout.dimension)]

    @property
    def h1(self) -> np.ndarray:
        return self.velocity[vector_dofs(self.layout.interface_nodes, self.layout.dimension)]

    @property
    def w1(self) -> np.ndarray:
        return self.velocity[vector_dofs(self.layout.solid_nodes, self.layout.dimension)]

    @property
    def w0(self) -> np.ndarray:
        return self.displacement

    @property
    def h0(self) -> np.ndarray:
        return self.displacement[vector_dofs(self.layout.trace_positions(self.layout.solid_nodes),
                                             self.layout.dimension)]

    def blocks(self) -> Dict[str, np.ndarray]:
        """The five blocks in state order."""
        return {"u": self.u, "h0": self.h0, "h1": self.h1, "w0": self.w0, "w1": self.w1}

    def copy(self) -> "StateVector":
        return StateVector(self.layout, self.velocity.copy(), self.displacement.copy())

    def __add__(self, other: "StateVector") -> "StateVector":
        self._check(other)
        return StateVector(self.layout, self.velocity + other.velocity, self.displacement + other.displacement)

    def __sub__(self, other: "StateVector") -> "StateVector":
        self._check(other)
        return StateVector(self.layout, self.velocity - other.velocity, self.displacement - other.displacement)

    def __mul__(self, scalar) -> "StateVector":
        return StateVector(self.layout, scalar * self.velocity, scalar * self.displacement)

    __rmul__ = __mul__

    def _check(self, other: "StateVector") -> None:
        if other.layout.n_velocity != self.layout.n_velocity or \
                other.layout.n_displacement != self.layout.n_displacement:
            raise DimensionError("state", (self.layout.n_velocity, self.layout.n_displacement),
                                 (other.layout.n_velocity, other.layout.n_displacement))


@dataclass(frozen=True, eq=False)
class FormSet:
    """
    Assembled bilinear forms, all in velocity numbering (d * n_nodes).

    A_f: 2<eps(u), eps(v)> on the fluid; B: <div u, q> (pressure x velocity);
    M_f, M_G, M_s: fluid, interface and solid masses; S_G: <grad_G h, grad_G phi>;
    E_s: <sigma(w), eps(psi)>; A_s = E_s + M_s; N_G: <nu, phi> on GAMMA_S;
    L_p, M_p: P1 pressure Laplacian and mass on the fluid.
    """

    layout: SpaceLayout
    lam: float
    mu: float
    A_f: sp.csr_matrix
    B: sp.csr_matrix
    M_f: sp.csr_matrix
    M_G: sp.csr_matrix
    S_G: sp.csr_matrix
    E_s: sp.csr_matrix
    M_s: sp.csr_matrix
    N_G: np.ndarray
    L_p: sp.csr_matrix
    M_p: sp.csr_matrix

    @cached_property
    def A_s(self) -> sp.csr_matrix:
        return (self.E_s + self.M_s).tocsr()

    @cached_property
    def M_V(self) -> sp.csr_matrix:
        """Kinetic Gram matrix of the velocity field."""
        return (self.M_f + self.M_G + self.M_s).tocsr()

    @cached_property
    def K_D(self) -> sp.csr_matrix:
        """Elastic Gram matrix of the displacement field: R (S_G + A_s) R^T."""
        R = self.layout.restriction
        return (R @ (self.S_G + self.A_s) @ R.T).tocsr()

    @cached_property
    def N_D(self) -> np.ndarray:
        """Interface normal load in displacement numbering."""
        return self.layout.restriction @ self.N_G


def _cell_data(mesh: Mesh, cells: np.ndarray, degree: int = QUADRATURE_DEGREE):
    d = mesh.dimension
    points, weights = simplex_quadrature(d, degree)
    lam = barycentric(points)
    grad_lam, measure = simplex_geometry(mesh.vertices[mesh.cells[cells]])
    factorial = float(np.prod(np.arange(1, d + 1)))
    jw = np.abs(measure)[:, None] * factorial * weights[None, :]
    return lam, grad_lam, jw


def _scatter(rows, cols, values, shape) -> sp.csr_matrix:
    return sp.coo_matrix((values.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()


def _vector_mass_local(phi: np.ndarray, jw: np.ndarray, d: int) -> np.ndarray:
    scalar = np.einsum("eq,qa,qb->eab", jw, phi, phi)
    ne, nb = scalar.shape[:2]
    local = np.einsum("eab,cf->eacbf", scalar, np.eye(d))
    return local.reshape(ne, nb * d, nb * d)


def _strain_local(grads: np.ndarray, jw: np.ndarray, d: int, mu: float, lam: float) -> np.ndarray:
    """mu * (grad-grad + transpose coupling) + lam * div-div, local (a,c) x (b,f) blocks."""
    X = np.einsum("eq,eqai,eqbj->eaibj", jw, grads, grads)
    lap = np.einsum("eaibi->eab", X)
    ne, nb = lap.shape[:2]
    local = mu * np.einsum("eab,cf->eacbf", lap, np.eye(d))
    local += mu * X.transpose(0, 1, 4, 3, 2)
    local += lam * X
    return local.reshape(ne, nb * d, nb * d)


def _assemble_cells(layout: SpaceLayout, cells: np.ndarray, local: np.ndarray) -> sp.csr_matrix:
    d = layout.dimension
    dofs = (d * layout.cell_nodes[cells][:, :, None] + np.arange(d)).reshape(len(cells), -1)
    rows = np.repeat(dofs[:, :, None], dofs.shape[1], axis=2)
    cols = np.repeat(dofs[:, None, :], dofs.shape[1], axis=1)
    n = layout.n_velocity
    return _scatter(rows, cols, local, (n, n))


def _check_symmetric(name: str, matrix: sp.spmatrix, rtol: float = 1e-12) -> None:
    scale = abs(matrix).max()
    asym = abs(matrix - matrix.T).max()
    if scale > 0 and asym > rtol * scale:
        raise RuntimeError(f"Assembled {name} is not symmetric (relative asymmetry {asym / scale:.3e})")
    logger.debug(f"{name}: nnz={matrix.nnz}, relative asymmetry={asym / scale if scale else 0.0:.3e}")


def assemble_forms(mesh: Mesh, layout: SpaceLayout, lam: float = 1.0, mu: float = 1.0) -> FormSet:
    """
    Assemble every bilinear form of the coupled problem.

    Args:
        mesh: Mesh the layout was built on
        layout: Space layout
        lam: First Lame parameter, >= 0
        mu: Shear modulus, > 0

    Returns:
        FormSet: symmetric sparse matrices and the interface normal load
    """
    if mu <= 0 or lam < 0:
        raise ValueError(f"Lame parameters must satisfy mu > 0, lambda >= 0 (got mu={mu}, lambda={lam})")

    d = mesh.dimension
    n = layout.n_velocity
    fluid = mesh.cells_of(FLUID)
    solid = mesh.cells_of(SOLID)

    # Fluid: viscous form, mass, divergence
    lam_q, grad_lam, jw = _cell_data(mesh, fluid)
    phi = p2_values(lam_q)
    grads = p2_gradients(lam_q, grad_lam)
    A_f = _assemble_cells(layout, fluid, _strain_local(grads, jw, d, mu=1.0, lam=0.0))
    M_f = _assemble_cells(layout, fluid, _vector_mass_local(phi, jw, d))

    # B[i, (a, c)] = int lambda_i d_c N_a
    div_local = np.einsum("eq,qi,eqac->eiac", jw, lam_q, grads).reshape(len(fluid), d + 1, -1)
    p_rows = layout.pressure_index[mesh.cells[fluid]]
    v_cols = (d * layout.cell_nodes[fluid][:, :, None] + np.arange(d)).reshape(len(fluid), -1)
    B = _scatter(np.repeat(p_rows[:, :, None], v_cols.shape[1], axis=2),
                 np.repeat(v_cols[:, None, :], d + 1, axis=1),
                 div_local, (layout.n_p, n))

    # Pressure Laplacian and mass (P1)
    p_grad = np.einsum("eq,eid,ejd->eij", jw, grad_lam, grad_lam)
    p_mass = np.einsum("eq,qi,qj->eij", jw, lam_q, lam_q)
    rows = np.repeat(p_rows[:, :, None], d + 1, axis=2)
    cols = np.repeat(p_rows[:, None, :], d + 1, axis=1)
    L_p = _scatter(rows, cols, p_grad, (layout.n_p, layout.n_p))
    M_p = _scatter(rows, cols, p_mass, (layout.n_p, layout.n_p))

    # Solid: strain energy and mass
    lam_q, grad_lam, jw = _cell_data(mesh, solid)
    phi = p2_values(lam_q)
    grads = p2_gradients(lam_q, grad_lam)
    E_s = _assemble_cells(layout, solid, _strain_local(grads, jw, d, mu=mu, lam=lam))
    M_s = _assemble_cells(layout, solid, _vector_mass_local(phi, jw, d))

    M_G, S_G, N_G = _assemble_interface(mesh, layout)

    forms = FormSet(layout, float(lam), float(mu), A_f, B, M_f, M_G, S_G, E_s, M_s, N_G, L_p, M_p)
    for name in ("A_f", "M_f", "M_G", "S_G", "E_s", "M_s", "L_p", "M_p"):
        _check_symmetric(name, getattr(forms, name))
    logger.info(f"Assembled forms (lambda={lam}, mu={mu}): velocity dofs={n}, "
                f"pressure dofs={layout.n_p}, nnz(A_f)={A_f.nnz}, nnz(A_s)={forms.A_s.nnz}")
    return forms


def _assemble_interface(mesh: Mesh, layout: SpaceLayout):
    d = mesh.dimension
    n = layout.n_velocity
    frame = interface_frame(mesh)
    points, weights = simplex_quadrature(d - 1, QUADRATURE_DEGREE)
    lam_q = barycentric(points)
    grad_lam, measure = facet_geometry(mesh.vertices[frame.facets])
    factorial = float(np.prod(np.arange(1, d)))
    jw = measure[:, None] * factorial * weights[None, :]
    phi = p2_values(lam_q)
    grads = p2_gradients(lam_q, grad_lam)

    nodes = layout.interface_facet_nodes
    # interface_frame and the layout list GAMMA_S facets in the same mesh order
    dofs = (d * nodes[:, :, None] + np.arange(d)).reshape(nodes.shape[0], -1)
    rows = np.repeat(dofs[:, :, None], dofs.shape[1], axis=2)
    cols = np.repeat(dofs[:, None, :], dofs.shape[1], axis=1)

    M_G = _scatter(rows, cols, _vector_mass_local(phi, jw, d), (n, n))
    lap = np.einsum("eq,eqai,eqbi->eab", jw, grads, grads)
    S_local = np.einsum("eab,cf->eacbf", lap, np.eye(d)).reshape(dofs.shape[0], dofs.shape[1], -1)
    S_G = _scatter(rows, cols, S_local, (n, n))

    load = np.einsum("eq,qa,ec->eac", jw, phi, frame.normals).reshape(dofs.shape[0], -1)
    N_G = np.bincount(dofs.ravel(), weights=load.ravel(), minlength=n)
    return M_G, S_G, N_G


def energy_inner_product(phi: StateVector, psi: StateVector, forms: FormSet):
    """
    Energy inner product, conjugate-linear in the second argument.

    <Phi, Psi>_H = M_f(u, u~) + S_G(h0, h0~) + M_G(h1, h1~) + A_s(w0, w0~) + M_s(w1, w1~)
    """
    layout = forms.layout
    for state in (phi, psi):
        if state.velocity.shape != (layout.n_velocity,) or state.displacement.shape != (layout.n_displacement,):
            raise DimensionError("state", (layout.n_velocity, layout.n_displacement),
                                 (state.velocity.size, state.displacement.size))
    value = (forms.M_V @ phi.velocity) @ np.conj(psi.velocity) \
        + (forms.K_D @ phi.displacement) @ np.conj(psi.displacement)
    if np.iscomplexobj(value):
        return complex(value)
    return float(value)


def energy_norm(state: StateVector, forms: FormSet) -> float:
    return float(np.sqrt(max(0.0, np.real(energy_inner_product(state, state, forms)))))


def energy_components(state: StateVector, forms: FormSet) -> Dict[str, float]:
    """Squared norms of the five energy contributions (summing to <Phi, Phi>_H)."""
    R = forms.layout.restriction
    V, D = state.velocity, state.displacement
    DV = R.T @ D

    def quad(matrix, x):
        return float(np.real((matrix @ x) @ np.conj(x)))

    return {
        "fluid_kinetic": quad(forms.M_f, V),
        "interface_kinetic": quad(forms.M_G, V),
        "interface_elastic": quad(forms.S_G, DV),
        "solid_kinetic": quad(forms.M_s, V),
        "solid_elastic": quad(forms.A_s, DV),
    }


def assemble_gram(forms: FormSet) -> sp.csr_matrix:
    """Gram matrix of the energy inner product on [velocity field, displacement field]."""
    return sp.block_diag([forms.M_V, forms.K_D], format="csr")


def export_matrix(matrix, path: str, comment: Optional[str] = None) -> None:
    """Write ``matrix`` in MatrixMarket coordinate format."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    scipy.io.mmwrite(path, sp.coo_matrix(matrix), comment=comment or "", precision=17)
    logger.info(f"Matrix {matrix.shape} written to: {path}")


def facet_quadrature(mesh: Mesh, facets: np.ndarray, degree: int = QUADRATURE_DEGREE):
    """
    Quadrature on facets.

    Returns:
        (lam, jw, points): facet barycentric coordinates (q, d), weights times
        measure (nf, q) and physical points (nf, q, d)
    """
    d = mesh.dimension
    reference, weights = simplex_quadrature(d - 1, degree)
    lam = barycentric(reference)
    coords = mesh.vertices[facets]
    _, measure = facet_geometry(coords)
    factorial = float(np.prod(np.arange(1, d)))
    jw = measure[:, None] * factorial * weights[None, :]
    return lam, jw, np.einsum("qk,fkd->fqd", lam, coords)


def cell_derivatives_at(layout: SpaceLayout, cells: np.ndarray, points: np.ndarray):
    """
    P2 gradients and Hessians of the given cells' basis functions.

    Args:
        cells: Cell indices (n,)
        points: Physical points inside (or on the boundary of) each cell, (n, q, d)

    Returns:
        (grads, hessians): shapes (n, q, nb, d) and (n, nb, d, d)
    """
    mesh = layout.mesh
    coords = mesh.vertices[mesh.cells[cells]]
    grad_lam, _ = simplex_geometry(coords)
    lam = np.einsum("fqd,fid->fqi", points - coords[:, None, 0, :], grad_lam)
    lam[:, :, 0] += 1.0
    return p2_gradients(lam, grad_lam), p2_hessians(grad_lam)
