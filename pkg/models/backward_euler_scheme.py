"""
Backward Euler scheme, over-dissipative control for the midpoint scheme.
"""
import numpy as np

from models.base_scheme import TimeScheme


class BackwardEulerScheme(TimeScheme):
    """(I - dt A_h) x_{n+1} = x_n."""

    name = "backward_euler"

    @property
    def theta(self) -> float:
        return 1.0

    def predicted_energy_change(self, x0: np.ndarray, x1: np.ndarray) -> float:
        # numerical dissipation 1/2 |x1 - x0|_H^2 on top of the physical one
        return -self.dt * self.bundle.dissipation(x1) - 0.5 * self.bundle.norm(x1 - x0) ** 2
