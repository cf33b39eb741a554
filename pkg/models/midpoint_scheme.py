"""
Implicit midpoint (Crank-Nicolson) scheme.
"""
import numpy as np

from models.base_scheme import TimeScheme


class MidpointScheme(TimeScheme):
    """
    (I - dt/2 A_h) x_{n+1} = (I + dt/2 A_h) x_n.

    The quadratic energy balance is reproduced exactly:
    E_{n+1} - E_n = -dt D(x_{n+1/2}) with x_{n+1/2} the average of the two states.
    """

    name = "midpoint"

    @property
    def theta(self) -> float:
        return 0.5

    def predicted_energy_change(self, x0: np.ndarray, x1: np.ndarray) -> float:
        return -self.dt * self.bundle.dissipation(0.5 * (x0 + x1))
