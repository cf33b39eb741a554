"""
Time integration of dPhi/dt = A_h Phi with energy tracking.

Every step records the energy, the viscous dissipation, the distance to the
complement of the steady state and the five energy contributions, so the
contraction, the discrete dissipation identity, flow invariance and decay
can all be read off the trace.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from models.base_scheme import TimeScheme
from models.generator import GeneratorBundle
from models.nullspace_resolvent import NullspaceData, project_reduced
from models.scheme_loader import load_scheme
from utils.errors import DimensionError, SolverError
from utils.fem import StateVector

logger = logging.getLogger(__name__)

COMPONENTS = ("fluid_kinetic", "interface_kinetic", "interface_elastic", "solid_kinetic", "solid_elastic")
TRACE_COLUMNS = ("t", "E", "D", "l_defect") + COMPONENTS + ("balance_defect",)


class ReducedEnergy:
    """Energy contributions evaluated directly in reduced coordinates."""

    def __init__(self, bundle: GeneratorBundle):
        forms, Z = bundle.forms, bundle.reducer.Z
        R = bundle.layout.restriction
        self.bundle = bundle
        self.fluid = Z.T @ (forms.M_f @ Z)
        self.interface = Z.T @ (forms.M_G @ Z)
        self.interface_elastic = (R @ forms.S_G @ R.T).tocsr()
        self.solid_elastic = (R @ forms.A_s @ R.T).tocsr()

    def __call__(self, x: np.ndarray) -> Dict[str, float]:
        y, D = self.bundle.split(x)
        fluid = float(y @ (self.fluid @ y))
        interface = float(y @ (self.interface @ y))
        return {
            "fluid_kinetic": fluid,
            "interface_kinetic": interface,
            "interface_elastic": float(D @ (self.interface_elastic @ D)),
            # Z is M_V-orthonormal, so the three kinetic parts add up to |y|^2
            "solid_kinetic": float(y @ y) - fluid - interface,
            "solid_elastic": float(D @ (self.solid_elastic @ D)),
        }


@dataclass
class EnergyTrace:
    """
    Per-step energy record.

    l_defect is |<Phi, phi_N>_H| / |phi_N|_H, i.e. |l(Phi)| scaled by the norm of l,
    so it is directly comparable with |Phi|_H.
    """

    t: List[float] = field(default_factory=list)
    E: List[float] = field(default_factory=list)
    D: List[float] = field(default_factory=list)
    l_defect: List[float] = field(default_factory=list)
    components: Dict[str, List[float]] = field(default_factory=lambda: {name: [] for name in COMPONENTS})
    balance_defect: List[float] = field(default_factory=list)
    pressure_mean: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    def append(self, t: float, energy: float, dissipation: float, l_defect: float,
               components: Dict[str, float], balance_defect: float = 0.0) -> None:
        self.t.append(float(t))
        self.E.append(float(energy))
        self.D.append(float(dissipation))
        self.l_defect.append(float(l_defect))
        for name in COMPONENTS:
            self.components[name].append(float(components[name]))
        self.balance_defect.append(float(balance_defect))

    def to_frame(self) -> pd.DataFrame:
        """Columns in the order t, E, D, l_defect, components, balance_defect."""
        data = {"t": self.t, "E": self.E, "D": self.D, "l_defect": self.l_defect}
        data.update({name: self.components[name] for name in COMPONENTS})
        data["balance_defect"] = self.balance_defect
        return pd.DataFrame(data, columns=list(TRACE_COLUMNS))

    def is_monotone(self, rtol: float = 1e-12) -> bool:
        """E_{n+1} <= E_n + rtol * E_0 for every step."""
        if len(self.E) < 2:
            return True
        E = np.asarray(self.E)
        return bool(np.all(np.diff(E) <= rtol * E[0]))

    def max_balance_defect(self) -> float:
        return float(max(self.balance_defect[1:], default=0.0))

    def component_sum_defect(self) -> float:
        """Largest relative gap between the component sum and 2E."""
        if not self.E:
            return 0.0
        total = np.sum([self.components[name] for name in COMPONENTS], axis=0)
        E = np.asarray(self.E)
        return float(np.max(np.abs(total - 2 * E) / np.maximum(2 * E, 1e-300)))

    def decay_ratio(self) -> float:
        """E(T) / E(0)."""
        if not self.E or self.E[0] == 0:
            return float("nan")
        return self.E[-1] / self.E[0]

    def horizon_below(self, fraction: float) -> Optional[float]:
        """First recorded time with E <= fraction * E(0), or None."""
        if not self.E:
            return None
        hits = np.flatnonzero(np.asarray(self.E) <= fraction * self.E[0])
        return float(self.t[hits[0]]) if hits.size else None

    def decay_rate(self, tail: float = 0.5) -> float:
        """Least-squares slope of log E over the last ``tail`` fraction of the run (E ~ exp(rate * t))."""
        n = len(self.E)
        start = int(n * (1.0 - tail))
        t = np.asarray(self.t[start:])
        E = np.asarray(self.E[start:])
        positive = E > 0
        if positive.sum() < 2:
            return float("nan")
        return float(np.polyfit(t[positive], np.log(E[positive]), 1)[0])


@dataclass(eq=False)
class EvolutionResult:
    trace: EnergyTrace
    final: np.ndarray
    snapshots: List[Tuple[float, np.ndarray]] = field(default_factory=list)
    scheme: Dict = field(default_factory=dict)


def _as_reduced(bundle: GeneratorBundle, state: Union[StateVector, np.ndarray]) -> np.ndarray:
    if isinstance(state, StateVector):
        x = bundle.to_reduced(state)
    else:
        x = np.asarray(state)
        if x.shape != (bundle.dimension,):
            raise DimensionError("reduced state", bundle.dimension, x.shape)
    if np.iscomplexobj(x):
        x = np.real(x)
    return np.asarray(x, dtype=float).copy()


def _l_defect(bundle: GeneratorBundle, x: np.ndarray, x_n: Optional[np.ndarray], h_norm: float) -> float:
    if x_n is None:
        return 0.0
    return abs(bundle.inner(x, x_n)) / h_norm


def step(bundle: GeneratorBundle, state: Union[StateVector, np.ndarray], dt: float,
         scheme: Union[str, TimeScheme] = "midpoint") -> np.ndarray:
    """
    Advance one step.

    Args:
        bundle: Generator bundle
        state: State or reduced coordinates
        dt: Time step
        scheme: Scheme name or an already factorized scheme

    Returns:
        np.ndarray: Reduced coordinates after one step
    """
    if isinstance(scheme, str):
        scheme = load_scheme(scheme, bundle, dt)
    return scheme.step(_as_reduced(bundle, state))


def evolve(bundle: GeneratorBundle, initial: Union[StateVector, np.ndarray], T: float, dt: float,
           scheme: str = "midpoint", nulldata: Optional[NullspaceData] = None,
           project_initial: bool = False, project_each_step: bool = False,
           snapshot_every: int = 0, record_pressure: bool = False,
           progress: bool = True) -> EvolutionResult:
    """
    Integrate from ``initial`` over [0, T].

    Args:
        bundle: Generator bundle
        initial: Initial state (StateVector or reduced coordinates)
        T: Final time
        dt: Time step
        scheme: Scheme name (see SchemeLoader)
        nulldata: Steady state; needed for projections and the l-defect column
        project_initial: Project the initial state onto N-perp once
        project_each_step: Re-project after every step
        snapshot_every: Keep every k-th state (0 keeps none)
        record_pressure: Record the mean multiplier pressure per step

    Returns:
        EvolutionResult

    Raises:
        SolverError: Non-finite state, with the step index
    """
    if T < 0:
        raise ValueError(f"Final time must be non-negative, got {T}")
    if (project_initial or project_each_step) and nulldata is None:
        raise ValueError("Projection onto N-perp needs the nullvector data")
    integrator = load_scheme(scheme, bundle, dt)
    energy = ReducedEnergy(bundle)

    x = _as_reduced(bundle, initial)
    x_n = bundle.to_reduced(nulldata.state) if nulldata is not None else None
    h_norm = nulldata.h_norm if nulldata is not None else 1.0
    if project_initial:
        x = project_reduced(bundle, x, nulldata)

    trace = EnergyTrace()
    pressure_mass = bundle.forms.M_p @ np.ones(bundle.layout.n_p)
    fluid_area = float(pressure_mass.sum())

    def record(t, x_prev, x_now):
        balance = integrator.balance_defect(x_prev, x_now) if x_prev is not None else 0.0
        trace.append(t, integrator.energy(x_now), bundle.dissipation(x_now),
                     _l_defect(bundle, x_now, x_n, h_norm), energy(x_now), balance)
        if record_pressure:
            state = bundle.from_reduced(x_now)
            p = bundle.reducer.recover_pressure(state.velocity, state.displacement)
            trace.pressure_mean.append(float(pressure_mass @ p) / fluid_area)

    n_steps = int(round(T / dt))
    snapshots = []
    record(0.0, None, x)
    if snapshot_every:
        snapshots.append((0.0, x.copy()))

    for n in tqdm(range(1, n_steps + 1), desc=f"Evolve ({integrator.name})", disable=not progress):
        try:
            x_next = integrator.step(x)
        except SolverError as e:
            raise SolverError(str(e), step=n) from e
        if project_each_step:
            x_next = project_reduced(bundle, x_next, nulldata)
        record(n * dt, x, x_next)
        if not np.isfinite(trace.E[-1]):
            raise SolverError("Energy became non-finite", step=n)
        x = x_next
        if snapshot_every and n % snapshot_every == 0:
            snapshots.append((n * dt, x.copy()))

    logger.info(f"Evolution ({integrator.name}, dt={dt}, {n_steps} steps): "
                f"E(T)/E(0)={trace.decay_ratio():.6e}, monotone={trace.is_monotone()}, "
                f"max balance defect={trace.max_balance_defect():.3e}")
    return EvolutionResult(trace, x, snapshots, integrator.get_scheme_info())
