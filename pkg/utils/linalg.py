"""
Sparse factorizations shared by the solvers.

Factors are computed once with SuperLU and reused for every right side;
complex right sides against real factors are solved part by part.
"""
import logging
import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from utils.errors import SolverError

logger = logging.getLogger(__name__)


class SparseFactor:
    """LU factorization of a square sparse matrix."""

    def __init__(self, matrix, name: str = "matrix", symmetric: bool = False):
        matrix = sp.csc_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise SolverError(f"Cannot factorize non-square {name} {matrix.shape}")
        self.name = name
        self.shape = matrix.shape
        self.dtype = matrix.dtype
        options = dict(SymmetricMode=True) if symmetric else {}
        try:
            self._lu = splu(matrix, options=options)
        except RuntimeError as e:
            raise SolverError(f"Factorization of {name} failed: {e}") from e
        logger.debug(f"Factorized {name}: shape={matrix.shape}, nnz={matrix.nnz}")

    def solve(self, rhs: np.ndarray, trans: str = "N") -> np.ndarray:
        rhs = np.asarray(rhs)
        if np.iscomplexobj(rhs) and not np.iscomplexobj(np.empty(0, self.dtype)):
            return self._solve(rhs.real, trans) + 1j * self._solve(rhs.imag, trans)
        return self._solve(rhs, trans)

    def _solve(self, rhs: np.ndarray, trans: str) -> np.ndarray:
        x = self._lu.solve(np.ascontiguousarray(rhs), trans=trans)
        if not np.all(np.isfinite(x)):
            raise SolverError(f"Solve with {self.name} produced non-finite values")
        return x


def resolvent_norm(matrix: np.ndarray, shift: complex, border: np.ndarray = None,
                   singular_threshold: float = 1e10, tol: float = 1e-10) -> float:
    """
    Spectral norm of (shift I - matrix)^-1 by Lanczos on the normal operator.

    Args:
        matrix: Dense square matrix
        shift: Point of the complex plane
        border: Optional unit vector; the inverse is then taken on its
            orthogonal complement through the bordered system
            [[shift I - matrix, b], [b^H, 0]]
        singular_threshold: Norms above this value are reported as ``inf``
        tol: Lanczos tolerance

    Returns:
        float: the norm, or ``inf`` for a (numerically) singular shift
    """
    n = matrix.shape[0]
    dtype = np.result_type(matrix, shift, float if border is None else border)
    T = shift * np.eye(n, dtype=dtype) - matrix
    if border is not None:
        b = np.asarray(border, dtype=dtype).reshape(n, 1)
        T = np.block([[T, b], [b.conj().T, np.zeros((1, 1), dtype)]])

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(T)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * T.shape[0] * pivots.max():
        return float("inf")

    def project(v):
        if border is None:
            return v
        return v - b[:, 0] * (b[:, 0].conj() @ v)

    def pad(v):
        return v if border is None else np.append(v, 0.0)

    def normal(v):
        z = sla.lu_solve((lu, piv), pad(project(v)))[:n]
        w = sla.lu_solve((lu, piv), pad(project(z)), trans=2)[:n]
        return project(w)

    if n <= 2:
        dense = np.column_stack([normal(e) for e in np.eye(n, dtype=dtype)])
        value = np.linalg.eigvalsh(0.5 * (dense + dense.conj().T)).max()
    else:
        op = LinearOperator((n, n), matvec=normal, dtype=dtype)
        v0 = np.random.default_rng(0).standard_normal(n).astype(dtype)
        value = eigsh(op, k=1, which="LM", tol=tol, v0=v0, return_eigenvectors=False)[0]
    norm = float(np.sqrt(abs(value)))
    return float("inf") if norm > singular_threshold else norm
