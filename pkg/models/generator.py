"""
Discrete semigroup generator on the pressure-eliminated state space.

Reduced coordinates are x = [y, D]: y are the coordinates of the velocity
field in the divergence-free basis Z (so V = Z y carries u, h1 and w1 at
once) and D is the displacement field (h0 and w0). With Zr = R Z,

    M_H = diag(I, K_D),    K = [[-Z^T A_f Z, -Zr^T K_D], [K_D Zr, 0]],

and A_h = M_H^-1 K. The traction terms of the interface and structure rows
cancel against matched test functions, so no stress flux is evaluated.
"""
import logging
from functools import cached_property
from typing import Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from models.pressure_elimination import LerayReducer, PressureMaps
from utils.errors import DimensionError, SolverError
from utils.fem import FormSet, SpaceLayout, StateVector
from utils.linalg import SparseFactor
from utils.mesh import Mesh

logger = logging.getLogger(__name__)


class GeneratorBundle:
    """
    Gram matrix, block stiffness and generator in reduced coordinates.

    Attributes:
        M_H: Energy Gram matrix diag(I, K_D) (sparse)
        K: Dense block stiffness
        n_fluid: Number of divergence-free velocity coordinates
        n_displacement: Number of displacement coordinates
    """

    def __init__(self, layout: SpaceLayout, forms: FormSet, reducer: LerayReducer,
                 pressure_bc: str = "dirichlet", disable_dissipation: bool = False):
        self.layout = layout
        self.forms = forms
        self.reducer = reducer
        self.pressure_bc = pressure_bc
        self.disable_dissipation = disable_dissipation

        Z = reducer.Z
        self.n_fluid = Z.shape[1]
        self.n_displacement = layout.n_displacement
        K_D = forms.K_D

        if disable_dissipation:
            self.dissipation_block = np.zeros((self.n_fluid, self.n_fluid))
        else:
            self.dissipation_block = Z.T @ (forms.A_f @ Z)
        self.Zr = layout.restriction @ Z
        self._KZr = np.asarray(K_D @ self.Zr)

        self.K = np.block([
            [-self.dissipation_block, -self._KZr.T],
            [self._KZr, np.zeros((self.n_displacement, self.n_displacement))],
        ])
        self.M_H = sp.block_diag([sp.identity(self.n_fluid), K_D], format="csr")
        try:
            self._K_D_factor = SparseFactor(K_D, "K_D (displacement block of M_H)", symmetric=True)
        except SolverError as e:
            raise SolverError(f"Singular M_H: {e}") from e

    @property
    def dimension(self) -> int:
        return self.n_fluid + self.n_displacement

    # Coordinates

    def to_reduced(self, state: StateVector) -> np.ndarray:
        self._check_state(state)
        return np.concatenate([self.reducer.to_reduced(state.velocity), state.displacement])

    def from_reduced(self, x: np.ndarray) -> StateVector:
        x = self._check_reduced(x)
        y, D = x[:self.n_fluid], x[self.n_fluid:]
        return StateVector(self.layout, self.reducer.lift(y), D.copy())

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return x[:self.n_fluid], x[self.n_fluid:]

    def _check_state(self, state: StateVector) -> None:
        if state.velocity.shape != (self.layout.n_velocity,) or \
                state.displacement.shape != (self.layout.n_displacement,):
            raise DimensionError("state", (self.layout.n_velocity, self.layout.n_displacement),
                                 (state.velocity.size, state.displacement.size))

    def _check_reduced(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[0] != self.dimension:
            raise DimensionError("reduced state", self.dimension, x.shape[0])
        return x

    # Inner product

    def inner(self, x1: np.ndarray, x2: np.ndarray):
        """<x1, x2>_H, conjugate-linear in the second argument."""
        y1, D1 = self.split(x1)
        y2, D2 = self.split(x2)
        return y1 @ np.conj(y2) + (self.forms.K_D @ D1) @ np.conj(D2)

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(0.0, np.real(self.inner(x, x)))))

    def dissipation(self, x: np.ndarray) -> float:
        """u^T A_f u of the velocity part of x."""
        y = x[:self.n_fluid]
        return float(np.real((self.dissipation_block @ y) @ np.conj(y)))

    def solve_gram(self, rhs: np.ndarray) -> np.ndarray:
        """M_H^-1 rhs using the sparse factor of K_D."""
        rhs = self._check_reduced(rhs)
        top, bottom = self.split(rhs)
        return np.concatenate([top, self._K_D_factor.solve(bottom)])

    # Operator application

    def apply_reduced(self, x: np.ndarray) -> np.ndarray:
        return self.solve_gram(self.K @ self._check_reduced(x))

    def adjoint_apply_reduced(self, x: np.ndarray) -> np.ndarray:
        return self.solve_gram(self.K.T @ self._check_reduced(x))

    def apply(self, state: StateVector) -> StateVector:
        """A_h applied to a state (projected onto the divergence-free velocities)."""
        return self.from_reduced(self.apply_reduced(self.to_reduced(state)))

    def adjoint_apply(self, state: StateVector) -> StateVector:
        return self.from_reduced(self.adjoint_apply_reduced(self.to_reduced(state)))

    def apply_with_pressure(self, state: StateVector) -> Tuple[StateVector, np.ndarray]:
        """Full-space rate [V', D'] of the momentum equation together with the pressure."""
        self._check_state(state)
        rate, p = self.reducer.momentum_rate(state.velocity, state.displacement)
        D_rate = self.layout.restriction @ state.velocity
        return StateVector(self.layout, rate, D_rate), p

    @cached_property
    def A_dense(self) -> np.ndarray:
        """A_h = M_H^-1 K written out block by block."""
        n_d = self.n_displacement
        return np.block([
            [-self.dissipation_block, -self._KZr.T],
            [self.Zr, np.zeros((n_d, n_d))],
        ])

    @cached_property
    def adjoint_dense(self) -> np.ndarray:
        """A_h* = M_H^-1 K^T: identity blocks and couplings with flipped signs."""
        n_d = self.n_displacement
        return np.block([
            [-self.dissipation_block, self._KZr.T],
            [-self.Zr, np.zeros((n_d, n_d))],
        ])

    @cached_property
    def K_D_cholesky(self) -> np.ndarray:
        """Lower Cholesky factor L_D of K_D."""
        return sla.cholesky(self.forms.K_D.toarray(), lower=True)

    def whitened(self) -> np.ndarray:
        """
        A~ = L^-1 K L^-T with M_H = L L^T, similar to A_h; its 2-norm resolvent
        equals the H-norm resolvent of A_h.
        """
        L_D = self.K_D_cholesky
        coupling = self.Zr.T @ L_D
        n_d = self.n_displacement
        return np.block([
            [-self.dissipation_block, -coupling],
            [coupling.T, np.zeros((n_d, n_d))],
        ])

    def to_whitened(self, x: np.ndarray) -> np.ndarray:
        y, D = self.split(x)
        return np.concatenate([y, self.K_D_cholesky.T @ D])

    def from_whitened(self, z: np.ndarray) -> np.ndarray:
        y, E = self.split(z)
        return np.concatenate([y, sla.solve_triangular(self.K_D_cholesky.T, E, lower=False)])

    @cached_property
    def pressure_maps(self) -> PressureMaps:
        return PressureMaps(self.layout, self.forms, self.pressure_bc)

    def dissipativity_residual(self) -> float:
        """Largest eigenvalue of the symmetric part of K, relative to ||K|| (must be <= 0 up to roundoff)."""
        sym = 0.5 * (self.K + self.K.T)
        top = sla.eigvalsh(sym).max()
        return float(top / max(np.abs(self.K).max(), 1e-300))


def build_generator(mesh: Mesh, layout: SpaceLayout, forms: FormSet, reducer: LerayReducer,
                    pressure_bc: str = "dirichlet", disable_dissipation: bool = False) -> GeneratorBundle:
    """
    Assemble the generator bundle.

    Args:
        mesh: Mesh (must be the one the layout was built on)
        layout: Space layout
        forms: Assembled forms
        reducer: Leray reducer
        pressure_bc: Boundary condition of the harmonic pressure maps
        disable_dissipation: Zero the viscous block (skew test operator)

    Returns:
        GeneratorBundle
    """
    if layout.mesh is not mesh and layout.mesh != mesh:
        raise ValueError("Layout was built on a different mesh")
    bundle = GeneratorBundle(layout, forms, reducer, pressure_bc, disable_dissipation)
    logger.info(f"Generator: reduced dimension={bundle.dimension} "
                f"(fluid {bundle.n_fluid}, displacement {bundle.n_displacement})"
                + (", dissipation disabled" if disable_dissipation else ""))
    return bundle


def apply(bundle: GeneratorBundle, state: StateVector) -> StateVector:
    return bundle.apply(state)


def adjoint_apply(bundle: GeneratorBundle, state: StateVector) -> StateVector:
    return bundle.adjoint_apply(state)
