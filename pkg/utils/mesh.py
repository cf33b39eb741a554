"""
Two-region simplicial meshes: a solid body completely immersed in a fluid.

Cells carry a region tag (FLUID or SOLID); boundary facets carry GAMMA_S
(fluid/solid interface) or GAMMA_F (outer fluid boundary). Normals on the
interface point out of the fluid, i.e. into the solid.
"""
import logging
import os
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from utils.errors import MeshError

logger = logging.getLogger(__name__)

FLUID = 1
SOLID = 2
INTERIOR = 0
GAMMA_S = 10
GAMMA_F = 11

REGION_TAGS = (FLUID, SOLID)
FACET_TAGS = (GAMMA_S, GAMMA_F)

GEOMETRY_KINDS = ("annulus_disc", "box_in_box")


def _readonly(array, dtype):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable tagged simplicial mesh."""

    vertices: np.ndarray
    cells: np.ndarray
    cell_tags: np.ndarray
    facets: np.ndarray
    facet_tags: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", _readonly(self.vertices, float))
        object.__setattr__(self, "cells", _readonly(self.cells, np.int64))
        object.__setattr__(self, "cell_tags", _readonly(self.cell_tags, np.int64))
        object.__setattr__(self, "facets", _readonly(self.facets, np.int64))
        object.__setattr__(self, "facet_tags", _readonly(self.facet_tags, np.int64))

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def cells_of(self, tag: int) -> np.ndarray:
        """Indices of cells in region ``tag``."""
        return np.flatnonzero(self.cell_tags == tag)

    def facets_of(self, tag: int) -> np.ndarray:
        """Vertex tuples of facets tagged ``tag``."""
        return self.facets[self.facet_tags == tag]

    def scaled(self, factor: float) -> "Mesh":
        """Copy with all coordinates multiplied by ``factor``."""
        return Mesh(self.vertices * factor, self.cells, self.cell_tags,
                    self.facets, self.facet_tags)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mesh):
            return NotImplemented
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in [
                (self.vertices, other.vertices),
                (self.cells, other.cells),
                (self.cell_tags, other.cell_tags),
                (self.facets, other.facets),
                (self.facet_tags, other.facet_tags),
            ]
        )

    __hash__ = None


@dataclass(frozen=True)
class InterfaceFrame:
    """Per-facet geometry of the interface (or of the outer boundary)."""

    facets: np.ndarray        # (nf, d) vertex indices
    normals: np.ndarray       # (nf, d), out of the fluid
    tangents: np.ndarray      # (nf, d-1, d)
    measures: np.ndarray      # (nf,)
    midpoints: np.ndarray     # (nf, d)
    fluid_cells: np.ndarray   # (nf,)
    solid_cells: np.ndarray   # (nf,), -1 on GAMMA_F

    @property
    def total_measure(self) -> float:
        return float(self.measures.sum())


def cell_volumes(mesh: Mesh) -> np.ndarray:
    """Signed cell volumes (positive for positively oriented simplices)."""
    d = mesh.dimension
    coords = mesh.vertices[mesh.cells]
    jac = coords[:, 1:, :] - coords[:, :1, :]
    return np.linalg.det(jac) / float(np.prod(np.arange(1, d + 1)))


def _row_keys(rows: np.ndarray, base: int) -> np.ndarray:
    keys = np.zeros(rows.shape[0], dtype=np.int64)
    for k in range(rows.shape[1]):
        keys = keys * base + rows[:, k]
    return keys


def facet_adjacency(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    """
    All facets of the mesh with their neighbouring cells.

    Returns:
        (facets, neighbors): sorted facet vertex tuples (nu, d) in lexicographic
        order, and neighbouring cells (nu, 2) padded with -1 on the boundary.
    """
    d = mesh.dimension
    nc = mesh.n_cells
    opposite = [[j for j in range(d + 1) if j != i] for i in range(d + 1)]
    all_facets = np.concatenate([np.sort(mesh.cells[:, idx], axis=1) for idx in opposite])
    owner = np.tile(np.arange(nc), d + 1)

    unique, inverse, counts = np.unique(all_facets, axis=0, return_inverse=True,
                                        return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        raise MeshError("Non-manifold mesh: a facet is shared by more than two cells")

    order = np.argsort(inverse, kind="stable")
    starts = np.searchsorted(inverse[order], np.arange(unique.shape[0]))
    neighbors = np.full((unique.shape[0], 2), -1, dtype=np.int64)
    neighbors[:, 0] = owner[order[starts]]
    two = counts == 2
    neighbors[two, 1] = owner[order[starts[two] + 1]]
    return unique, neighbors


def locate_facets(mesh: Mesh, facets: np.ndarray, unique: np.ndarray) -> np.ndarray:
    """Row indices of ``facets`` inside the sorted facet table ``unique`` (-1 if absent)."""
    base = mesh.n_vertices
    keys = _row_keys(unique, base)
    query = _row_keys(np.sort(facets, axis=1), base)
    pos = np.searchsorted(keys, query)
    pos = np.clip(pos, 0, len(keys) - 1)
    found = keys[pos] == query
    return np.where(found, pos, -1)


def validate(mesh: Mesh) -> None:
    """
    Check every mesh invariant; raise MeshError naming the first violation.

    Invariants: known region/facet tags, positive cell volumes, no duplicate
    vertices, GAMMA_S facets between one FLUID and one SOLID cell, GAMMA_F
    facets on the outer boundary of the fluid, all region boundaries tagged,
    and a closed, connected interface.
    """
    d = mesh.dimension
    if d not in (2, 3):
        raise MeshError(f"Unsupported mesh dimension {d}")
    if mesh.cells.ndim != 2 or mesh.cells.shape[1] != d + 1:
        raise MeshError(f"Cells must have {d + 1} vertices")
    if mesh.facets.ndim != 2 or mesh.facets.shape[1] != d:
        raise MeshError(f"Facets must have {d} vertices")
    if mesh.cells.min(initial=0) < 0 or mesh.cells.max(initial=0) >= mesh.n_vertices:
        raise MeshError("Cell references a vertex out of range")
    if mesh.facets.size and (mesh.facets.min() < 0 or mesh.facets.max() >= mesh.n_vertices):
        raise MeshError("Facet references a vertex out of range")

    bad_cells = ~np.isin(mesh.cell_tags, REGION_TAGS)
    if np.any(bad_cells):
        raise MeshError(f"Cell {int(np.flatnonzero(bad_cells)[0])} has missing or unknown region tag")
    bad_facets = ~np.isin(mesh.facet_tags, FACET_TAGS)
    if np.any(bad_facets):
        raise MeshError(f"Facet {int(np.flatnonzero(bad_facets)[0])} has missing or unknown facet tag")
    if not np.any(mesh.cell_tags == FLUID) or not np.any(mesh.cell_tags == SOLID):
        raise MeshError("Mesh needs both FLUID and SOLID cells")

    volumes = cell_volumes(mesh)
    if np.any(volumes <= 0):
        raise MeshError(f"Cell {int(np.argmin(volumes))} has non-positive volume")

    bbox = np.linalg.norm(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0))
    pairs = cKDTree(mesh.vertices).query_pairs(1e-12 * bbox)
    if pairs:
        i, j = sorted(pairs)[0]
        raise MeshError(f"Duplicate vertices {i} and {j}")

    unique, neighbors = facet_adjacency(mesh)
    positions = locate_facets(mesh, mesh.facets, unique)
    if np.any(positions < 0):
        raise MeshError(f"Tagged facet {int(np.flatnonzero(positions < 0)[0])} is not a facet of any cell")

    tags_of_unique = np.full(unique.shape[0], INTERIOR, dtype=np.int64)
    tags_of_unique[positions] = mesh.facet_tags

    region = np.where(neighbors >= 0, mesh.cell_tags[np.maximum(neighbors, 0)], 0)
    boundary = neighbors[:, 1] < 0
    mixed = (~boundary) & (region[:, 0] != region[:, 1])

    for k in np.flatnonzero(tags_of_unique == GAMMA_S):
        if boundary[k] or not mixed[k]:
            raise MeshError(f"GAMMA_S facet {tuple(unique[k])} must be shared by one FLUID and one SOLID cell")
    for k in np.flatnonzero(tags_of_unique == GAMMA_F):
        if not boundary[k] or region[k, 0] != FLUID:
            raise MeshError(f"GAMMA_F facet {tuple(unique[k])} must belong to exactly one FLUID cell")
    untagged_boundary = boundary & (tags_of_unique != GAMMA_F)
    if np.any(untagged_boundary):
        k = int(np.flatnonzero(untagged_boundary)[0])
        raise MeshError(f"Boundary facet {tuple(unique[k])} is missing the GAMMA_F tag")
    untagged_interface = mixed & (tags_of_unique != GAMMA_S)
    if np.any(untagged_interface):
        k = int(np.flatnonzero(untagged_interface)[0])
        raise MeshError(f"Fluid/solid facet {tuple(unique[k])} is missing the GAMMA_S tag")

    _check_closed_connected(mesh.facets_of(GAMMA_S), d)


def _check_closed_connected(interface: np.ndarray, d: int) -> None:
    if interface.shape[0] == 0:
        raise MeshError("Mesh has no GAMMA_S interface")
    # Ridges: (d-2)-simplices of the interface; each must be shared twice
    ridge_idx = list(combinations(range(d), d - 1))
    ridges = np.concatenate([np.sort(interface[:, list(idx)], axis=1) for idx in ridge_idx])
    owner = np.tile(np.arange(interface.shape[0]), len(ridge_idx))
    _, inverse, counts = np.unique(ridges, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts != 2):
        raise MeshError("GAMMA_S interface is not closed (or not manifold)")
    order = np.argsort(inverse, kind="stable")
    first, second = owner[order[0::2]], owner[order[1::2]]
    n = interface.shape[0]
    graph = coo_matrix((np.ones(first.size), (first, second)), shape=(n, n))
    n_components, _ = connected_components(graph, directed=False)
    if n_components != 1:
        raise MeshError(f"GAMMA_S interface has {n_components} connected components")


def _oriented_frame(mesh: Mesh, facets: np.ndarray, toward: np.ndarray):
    """Normals pointing toward the points ``toward``, plus tangents and measures."""
    d = mesh.dimension
    coords = mesh.vertices[facets]
    midpoints = coords.mean(axis=1)
    edge = coords[:, 1, :] - coords[:, 0, :]
    if d == 2:
        measures = np.linalg.norm(edge, axis=1)
        tau = edge / measures[:, None]
        normals = np.stack([tau[:, 1], -tau[:, 0]], axis=1)
    else:
        cross = np.cross(edge, coords[:, 2, :] - coords[:, 0, :])
        measures = 0.5 * np.linalg.norm(cross, axis=1)
        normals = cross / (2 * measures[:, None])

    flip = np.einsum("fd,fd->f", normals, toward - midpoints) < 0
    normals[flip] *= -1

    if d == 2:
        tangents = np.stack([-normals[:, 1], normals[:, 0]], axis=1)[:, None, :]
    else:
        tau = edge / np.linalg.norm(edge, axis=1)[:, None]
        tau = tau - np.einsum("fd,fd->f", tau, normals)[:, None] * normals
        tau /= np.linalg.norm(tau, axis=1)[:, None]
        e = np.cross(normals, tau)
        tangents = np.stack([e, tau], axis=1)

    for array in (normals, tangents, measures, midpoints):
        array.setflags(write=False)
    return normals, tangents, measures, midpoints


def _neighbours(mesh: Mesh, facets: np.ndarray) -> np.ndarray:
    unique, neighbors = facet_adjacency(mesh)
    positions = locate_facets(mesh, facets, unique)
    if np.any(positions < 0):
        raise MeshError("Tagged facet not found in the mesh")
    return neighbors[positions]


def interface_frame(mesh: Mesh) -> InterfaceFrame:
    """Unit normals (out of the fluid), tangents and measures of GAMMA_S facets."""
    facets = mesh.facets_of(GAMMA_S)
    pair = _neighbours(mesh, facets)
    if np.any(pair[:, 1] < 0):
        raise MeshError("Non-manifold interface: GAMMA_S facet with a single neighbour")
    tags = mesh.cell_tags[pair]
    fluid_first = tags[:, 0] == FLUID
    fluid_cells = np.where(fluid_first, pair[:, 0], pair[:, 1])
    solid_cells = np.where(fluid_first, pair[:, 1], pair[:, 0])
    if np.any(mesh.cell_tags[solid_cells] != SOLID) or np.any(mesh.cell_tags[fluid_cells] != FLUID):
        raise MeshError("Non-manifold interface: GAMMA_S facet not between FLUID and SOLID")

    into_solid = mesh.vertices[mesh.cells[solid_cells]].mean(axis=1)
    normals, tangents, measures, midpoints = _oriented_frame(mesh, facets, into_solid)
    return InterfaceFrame(facets, normals, tangents, measures, midpoints,
                          fluid_cells, solid_cells)


def outer_boundary_frame(mesh: Mesh) -> InterfaceFrame:
    """Frame of the GAMMA_F facets with normals pointing out of the fluid domain."""
    facets = mesh.facets_of(GAMMA_F)
    pair = _neighbours(mesh, facets)
    if np.any(pair[:, 1] >= 0):
        raise MeshError("GAMMA_F facet shared by two cells")
    fluid_cells = pair[:, 0]
    centroids = mesh.vertices[mesh.cells[fluid_cells]].mean(axis=1)
    midpoints = mesh.vertices[facets].mean(axis=1)
    normals, tangents, measures, midpoints = _oriented_frame(mesh, facets, 2 * midpoints - centroids)
    return InterfaceFrame(facets, normals, tangents, measures, midpoints,
                          fluid_cells, np.full(len(facets), -1, dtype=np.int64))


def _orient(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    cells = np.array(cells, dtype=np.int64)
    coords = vertices[cells]
    jac = coords[:, 1:, :] - coords[:, :1, :]
    negative = np.linalg.det(jac) < 0
    cells[negative, 0], cells[negative, 1] = cells[negative, 1], cells[negative, 0].copy()
    return cells


def _annulus_disc(resolution: int) -> Mesh:
    n_seg = 2 * resolution
    layers = max(2, resolution // 2)
    theta = 2 * np.pi * np.arange(n_seg) / n_seg
    ring = np.stack([np.cos(theta), np.sin(theta)], axis=1)

    solid_radii = np.arange(1, layers + 1) / layers
    fluid_radii = 1.0 + np.arange(1, layers + 1) / layers
    radii = np.concatenate([solid_radii, fluid_radii])
    interface_ring = layers - 1

    vertices = np.vstack([np.zeros((1, 2))] + [r * ring for r in radii])

    def vid(m, j):
        return 1 + m * n_seg + (j % n_seg)

    cells, tags = [], []
    for j in range(n_seg):
        cells.append((0, vid(0, j), vid(0, j + 1)))
        tags.append(SOLID)
    for m in range(len(radii) - 1):
        tag = SOLID if m < interface_ring else FLUID
        for j in range(n_seg):
            a, b = vid(m, j), vid(m, j + 1)
            c, e = vid(m + 1, j + 1), vid(m + 1, j)
            cells.extend([(a, b, c), (a, c, e)])
            tags.extend([tag, tag])

    outer = len(radii) - 1
    facets = [(vid(interface_ring, j), vid(interface_ring, j + 1)) for j in range(n_seg)]
    facet_tags = [GAMMA_S] * n_seg
    facets += [(vid(outer, j), vid(outer, j + 1)) for j in range(n_seg)]
    facet_tags += [GAMMA_F] * n_seg

    return Mesh(vertices, _orient(vertices, cells), tags, facets, facet_tags)


def _box_in_box(resolution: int) -> Mesh:
    per_unit = max(2, resolution // 2)
    n = 4 * per_unit
    coords = np.linspace(-2.0, 2.0, n + 1)
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return i * (n + 1) + j

    cells, tags = [], []
    for i in range(n):
        for j in range(n):
            cx, cy = 0.5 * (coords[i] + coords[i + 1]), 0.5 * (coords[j] + coords[j + 1])
            tag = SOLID if max(abs(cx), abs(cy)) < 1.0 else FLUID
            a, b, c, e = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            # Diagonal through the nearest outer corner keeps corner cells away
            # from having all vertices on the boundary
            if cx * cy > 0:
                cells.extend([(a, b, c), (a, c, e)])
            else:
                cells.extend([(a, b, e), (b, c, e)])
            tags.extend([tag, tag])

    inner = [k for k in range(n + 1) if abs(coords[k]) <= 1.0 + 1e-12]
    lo, hi = inner[0], inner[-1]
    facets, facet_tags = [], []
    for k in range(lo, hi):
        for edge in [(vid(k, lo), vid(k + 1, lo)), (vid(k, hi), vid(k + 1, hi)),
                     (vid(lo, k), vid(lo, k + 1)), (vid(hi, k), vid(hi, k + 1))]:
            facets.append(edge)
            facet_tags.append(GAMMA_S)
    for k in range(n):
        for edge in [(vid(k, 0), vid(k + 1, 0)), (vid(k, n), vid(k + 1, n)),
                     (vid(0, k), vid(0, k + 1)), (vid(n, k), vid(n, k + 1))]:
            facets.append(edge)
            facet_tags.append(GAMMA_F)

    return Mesh(vertices, _orient(vertices, cells), tags, facets, facet_tags)


def make_reference_geometry(kind: str, resolution: int) -> Mesh:
    """
    Build one of the reference geometries.

    Args:
        kind: ``annulus_disc`` (fluid annulus 1 < r < 2 around the unit disc,
            interface polygon with 2*resolution segments) or ``box_in_box``
            (fluid [-2,2]^2 around the solid [-1,1]^2)
        resolution: Refinement parameter, at least 4

    Returns:
        Mesh: validated mesh
    """
    if kind not in GEOMETRY_KINDS:
        raise MeshError(f"Unknown geometry kind: {kind}. Supported kinds: {list(GEOMETRY_KINDS)}")
    if int(resolution) != resolution or resolution < 4:
        raise MeshError(f"Resolution {resolution} too small to triangulate (need >= 4)")

    mesh = _annulus_disc(int(resolution)) if kind == "annulus_disc" else _box_in_box(int(resolution))
    validate(mesh)
    logger.info(f"Generated {kind} mesh: {mesh.n_vertices} vertices, {mesh.n_cells} cells, "
                f"{len(mesh.facets_of(GAMMA_S))} interface facets")
    return mesh


def interface_hausdorff_distance(mesh: Mesh, radius: float = 1.0, samples: int = 32) -> float:
    """Two-sided Hausdorff distance between the GAMMA_S polygon and a centred circle (2D)."""
    if mesh.dimension != 2:
        raise MeshError("Hausdorff distance to a circle is defined for 2D meshes only")
    facets = mesh.facets_of(GAMMA_S)
    a = mesh.vertices[facets[:, 0]]
    b = mesh.vertices[facets[:, 1]]
    t = np.linspace(0.0, 1.0, samples + 1)
    pts = (a[:, None, :] * (1 - t)[None, :, None] + b[:, None, :] * t[None, :, None]).reshape(-1, 2)
    polygon_to_circle = np.abs(np.linalg.norm(pts, axis=1) - radius).max()

    angles = np.linspace(0.0, 2 * np.pi, samples * len(facets), endpoint=False)
    circle = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    ab = b - a
    s = np.einsum("pfd,fd->pf", circle[:, None, :] - a[None], ab) / np.einsum("fd,fd->f", ab, ab)
    s = np.clip(s, 0.0, 1.0)
    nearest = a[None] + s[:, :, None] * ab[None]
    circle_to_polygon = np.linalg.norm(circle[:, None, :] - nearest, axis=2).min(axis=1).max()
    return float(max(polygon_to_circle, circle_to_polygon))


def save_mesh(mesh: Mesh, path: str) -> None:
    """Write ``mesh`` in the sectioned text format ($Vertices, $Cells, $Facets)."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write("$Vertices\n")
        for row in mesh.vertices:
            f.write(" ".join(f"{x:.17g}" for x in row) + "\n")
        f.write("$Cells\n")
        for tag, row in zip(mesh.cell_tags, mesh.cells):
            f.write(f"{tag} " + " ".join(str(v) for v in row) + "\n")
        f.write("$Facets\n")
        for tag, row in zip(mesh.facet_tags, mesh.facets):
            f.write(f"{tag} " + " ".join(str(v) for v in row) + "\n")
    logger.info(f"Mesh saved to: {path}")


def load_mesh(path: str) -> Mesh:
    """Read and validate a mesh written by :func:`save_mesh`."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Mesh file not found: {path}")

    sections: Dict[str, List[Tuple[int, List[str]]]] = {}
    current = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("$"):
                current = line[1:]
                if current not in ("Vertices", "Cells", "Facets"):
                    raise MeshError(f"Unknown section ${current}", line=lineno)
                if current in sections:
                    raise MeshError(f"Duplicate section ${current}", line=lineno)
                sections[current] = []
                continue
            if current is None:
                raise MeshError("Record outside of any section", line=lineno)
            sections[current].append((lineno, line.split()))

    if not sections:
        raise MeshError("Empty mesh file", line=1)
    for name in ("Vertices", "Cells", "Facets"):
        if name not in sections or not sections[name]:
            raise MeshError(f"Missing or empty section ${name}")

    def parse(records, width, kind, what):
        rows = []
        for lineno, tokens in records:
            if len(tokens) != width:
                raise MeshError(f"Expected {width} fields in {what} record, got {len(tokens)}", line=lineno)
            try:
                rows.append([kind(t) for t in tokens])
            except ValueError:
                raise MeshError(f"Malformed {what} record", line=lineno) from None
        return rows

    d = len(sections["Vertices"][0][1])
    vertices = parse(sections["Vertices"], d, float, "vertex")
    cells = parse(sections["Cells"], d + 2, int, "cell")
    facets = parse(sections["Facets"], d + 1, int, "facet")

    cells = np.array(cells, dtype=np.int64)
    facets = np.array(facets, dtype=np.int64)
    mesh = Mesh(np.array(vertices), cells[:, 1:], cells[:, 0], facets[:, 1:], facets[:, 0])
    validate(mesh)
    logger.info(f"Loaded mesh from {path}: {mesh.n_vertices} vertices, {mesh.n_cells} cells")
    return mesh
