"""
Tests for the shared sparse factorizations and the resolvent norm.
"""
import numpy as np
import pytest
import scipy.sparse as sp

from utils.errors import SolverError
from utils.linalg import SparseFactor, resolvent_norm


def _laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csc")


@pytest.mark.parametrize("symmetric", [False, True])
def test_sparse_factor_solves(symmetric):
    matrix = _laplacian_1d(12)
    rhs = np.linspace(-1.0, 1.0, 12)
    x = SparseFactor(matrix, "laplacian", symmetric=symmetric).solve(rhs)
    np.testing.assert_allclose(matrix @ x, rhs, atol=1e-12)


def test_symmetric_factor_solves_complex_rhs():
    matrix = _laplacian_1d(8)
    rhs = np.arange(8) + 1j * np.ones(8)
    x = SparseFactor(matrix, "laplacian", symmetric=True).solve(rhs)
    assert np.iscomplexobj(x)
    np.testing.assert_allclose(matrix @ x, rhs, atol=1e-12)


def test_symmetric_factor_solves_matrix_rhs():
    matrix = _laplacian_1d(6)
    x = SparseFactor(matrix, symmetric=True).solve(np.eye(6))
    np.testing.assert_allclose(matrix @ x, np.eye(6), atol=1e-12)


def test_non_square_factor_is_rejected():
    with pytest.raises(SolverError):
        SparseFactor(sp.csc_matrix(np.ones((2, 3))), "rectangle")


def test_singular_factor_is_rejected():
    with pytest.raises(SolverError):
        SparseFactor(sp.csc_matrix((3, 3)), "zero")


def test_resolvent_norm_of_diagonal_matrix():
    matrix = np.diag([-1.0, -2.0, -4.0, -8.0])
    assert resolvent_norm(matrix, 1j) == pytest.approx(1 / np.sqrt(2), rel=1e-8)


def test_resolvent_norm_is_infinite_at_an_eigenvalue():
    assert resolvent_norm(np.diag([0.0, -1.0, -2.0]), 0.0) == float("inf")


def test_bordered_resolvent_norm_skips_the_kernel():
    matrix = np.diag([0.0, -1.0, -2.0, -3.0])
    border = np.array([1.0, 0.0, 0.0, 0.0])
    assert resolvent_norm(matrix, 0.0, border=border) == pytest.approx(1.0, rel=1e-8)
