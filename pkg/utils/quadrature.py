"""
Quadrature rules and P2 Lagrange shape functions on simplices of any dimension.

Rules are collapsed Gauss-Legendre products on the reference simplex
{x_i >= 0, sum x_i <= 1}; shape functions are written in barycentric
coordinates so the same code serves segments, triangles and tetrahedra.
"""
from functools import lru_cache
from itertools import combinations
from math import ceil
from typing import Tuple

import numpy as np

from utils.errors import MeshError


@lru_cache(maxsize=None)
def simplex_quadrature(dim: int, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature on the reference simplex exact for polynomials of ``degree``.

    Args:
        dim: Simplex dimension (1, 2 or 3)
        degree: Polynomial degree integrated exactly

    Returns:
        (points, weights): points of shape (q, dim), weights summing to 1/dim!
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"Unsupported simplex dimension: {dim}")

    n = max(1, int(ceil((degree + dim) / 2)))
    xi, wi = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (xi + 1.0)
    w = 0.5 * wi

    if dim == 1:
        points = t[:, None]
        weights = w
    elif dim == 2:
        u, v = np.meshgrid(t, t, indexing="ij")
        wu, wv = np.meshgrid(w, w, indexing="ij")
        points = np.stack([u.ravel(), (v * (1 - u)).ravel()], axis=1)
        weights = (wu * wv * (1 - u)).ravel()
    else:
        u, v, s = np.meshgrid(t, t, t, indexing="ij")
        wu, wv, ws = np.meshgrid(w, w, w, indexing="ij")
        points = np.stack([
            u.ravel(),
            (v * (1 - u)).ravel(),
            (s * (1 - u) * (1 - v)).ravel(),
        ], axis=1)
        weights = (wu * wv * ws * (1 - u) ** 2 * (1 - v)).ravel()

    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


def local_edges(dim: int) -> Tuple[Tuple[int, int], ...]:
    """Local vertex pairs of a ``dim``-simplex, in the P2 edge-node order."""
    return tuple(combinations(range(dim + 1), 2))


def barycentric(points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates (q, dim+1) of reference points (q, dim)."""
    points = np.atleast_2d(points)
    return np.hstack([1.0 - points.sum(axis=1, keepdims=True), points])


def p2_values(lam: np.ndarray) -> np.ndarray:
    """
    P2 shape function values at barycentric points.

    Args:
        lam: Barycentric coordinates, shape (q, k+1) or per element (ne, q, k+1)

    Returns:
        np.ndarray: shape (..., q, nb) ordered vertices first, then local edges
    """
    k = lam.shape[-1] - 1
    vertex = lam * (2 * lam - 1)
    edge = np.stack([4 * lam[..., i] * lam[..., j] for i, j in local_edges(k)], axis=-1)
    return np.concatenate([vertex, edge], axis=-1)


def p2_gradients(lam: np.ndarray, grad_lam: np.ndarray) -> np.ndarray:
    """
    P2 shape function gradients.

    Args:
        lam: Barycentric coordinates, shape (q, k+1) or per element (ne, q, k+1)
        grad_lam: Barycentric gradients per element, shape (ne, k+1, d)

    Returns:
        np.ndarray: shape (ne, q, nb, d)
    """
    k = lam.shape[-1] - 1
    lam_e = lam if lam.ndim == 3 else lam[None]
    vertex = (4 * lam_e - 1)[..., None] * grad_lam[:, None, :, :]
    edges = []
    for i, j in local_edges(k):
        edges.append(4 * (lam_e[:, :, j, None] * grad_lam[:, None, i, :]
                          + lam_e[:, :, i, None] * grad_lam[:, None, j, :]))
    edge = np.stack(edges, axis=2)
    return np.concatenate([np.broadcast_to(vertex, edge.shape[:2] + vertex.shape[2:]), edge], axis=2)


def p2_hessians(grad_lam: np.ndarray) -> np.ndarray:
    """
    P2 shape function Hessians (constant per element).

    Args:
        grad_lam: Barycentric gradients per element, shape (ne, k+1, d)

    Returns:
        np.ndarray: shape (ne, nb, d, d)
    """
    k = grad_lam.shape[1] - 1
    vertex = 4 * np.einsum("eid,eif->eidf", grad_lam, grad_lam)
    edges = []
    for i, j in local_edges(k):
        outer = np.einsum("ed,ef->edf", grad_lam[:, i], grad_lam[:, j])
        edges.append(4 * (outer + np.swapaxes(outer, 1, 2)))
    edge = np.stack(edges, axis=1)
    return np.concatenate([vertex, edge], axis=1)


def simplex_geometry(coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Barycentric gradients and measures of full-dimensional simplices.

    Args:
        coords: Vertex coordinates, shape (ne, d+1, d)

    Returns:
        (grad_lam, measure): shapes (ne, d+1, d) and (ne,); measure is signed
        by orientation (determinant / d!)
    """
    d = coords.shape[2]
    jac = np.swapaxes(coords[:, 1:, :] - coords[:, :1, :], 1, 2)
    det = np.linalg.det(jac)
    if np.any(np.abs(det) < 1e-300):
        raise MeshError("Singular element Jacobian")
    inv = np.linalg.inv(jac)
    grad_tail = inv
    grad_head = -inv.sum(axis=1, keepdims=True)
    grad_lam = np.concatenate([grad_head, grad_tail], axis=1)
    factorial = float(np.prod(np.arange(1, d + 1)))
    return grad_lam, det / factorial


def facet_geometry(coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Tangential barycentric gradients and measures of codimension-one facets.

    Args:
        coords: Facet vertex coordinates, shape (nf, d, d)

    Returns:
        (grad_lam, measure): surface gradients (nf, d, d) and measures (nf,)
    """
    d = coords.shape[2]
    jac = np.swapaxes(coords[:, 1:, :] - coords[:, :1, :], 1, 2)
    metric = np.einsum("fdi,fdj->fij", jac, jac)
    metric_inv = np.linalg.inv(metric)
    # Rows: surface gradients of the reference coordinates
    grad_tail = np.einsum("fdi,fij->fjd", jac, metric_inv)
    grad_head = -grad_tail.sum(axis=1, keepdims=True)
    grad_lam = np.concatenate([grad_head, grad_tail], axis=1)
    factorial = float(np.prod(np.arange(1, d)))
    measure = np.sqrt(np.linalg.det(metric)) / factorial
    return grad_lam, measure
