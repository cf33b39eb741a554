"""
Base interface for the implicit time-stepping schemes.
"""
import logging
from abc import ABC, abstractmethod
from typing import Any, Dict

import numpy as np
import scipy.linalg as sla

from models.generator import GeneratorBundle
from utils.errors import SolverError

logger = logging.getLogger(__name__)


class TimeScheme(ABC):
    """
    One-step theta scheme (M_H - theta dt K) x_{n+1} = (M_H + (1 - theta) dt K) x_n
    in reduced coordinates, factorized once per (bundle, dt).
    """

    name: str = "theta"

    def __init__(self, bundle: GeneratorBundle, dt: float):
        if not dt > 0:
            raise ValueError(f"Time step must be positive, got {dt}")
        self.bundle = bundle
        self.dt = float(dt)
        M_H = bundle.M_H.toarray()
        self._explicit = M_H + (1.0 - self.theta) * self.dt * bundle.K
        try:
            self._lu = sla.lu_factor(M_H - self.theta * self.dt * bundle.K)
        except (ValueError, sla.LinAlgError) as e:
            raise SolverError(f"Factorization of the {self.name} step matrix failed: {e}") from e
        logger.debug(f"{self.name} scheme factorized: dimension={bundle.dimension}, dt={self.dt}")

    @property
    @abstractmethod
    def theta(self) -> float:
        """Implicitness parameter."""
        pass

    @abstractmethod
    def predicted_energy_change(self, x0: np.ndarray, x1: np.ndarray) -> float:
        """E(x1) - E(x0) implied by the scheme's discrete energy identity."""
        pass

    def step(self, x: np.ndarray) -> np.ndarray:
        """Advance a reduced state by one time step."""
        x_next = sla.lu_solve(self._lu, self._explicit @ x)
        if not np.all(np.isfinite(x_next)):
            raise SolverError(f"{self.name} step produced non-finite values")
        return x_next

    def energy(self, x: np.ndarray) -> float:
        return 0.5 * self.bundle.norm(x) ** 2

    def balance_defect(self, x0: np.ndarray, x1: np.ndarray) -> float:
        """Relative mismatch between the observed and the predicted energy change."""
        observed = self.energy(x1) - self.energy(x0)
        predicted = self.predicted_energy_change(x0, x1)
        return abs(observed - predicted) / max(self.energy(x0), 1e-300)

    def get_scheme_info(self) -> Dict[str, Any]:
        return {
            "scheme": self.name,
            "theta": self.theta,
            "dt": self.dt,
            "type": self.__class__.__name__,
        }
