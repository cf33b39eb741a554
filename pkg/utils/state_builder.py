"""
Initial-state samplers and state files.

State files are CSV with one row per entry, columns ``block,index,value``,
blocks labeled u, h0, h1, w0, w1 in that order.
"""
import logging
import os
from typing import Optional, Union

import numpy as np
import pandas as pd

from models.generator import GeneratorBundle
from models.nullspace_resolvent import NullspaceData, project_reduced
from utils.errors import DimensionError
from utils.fem import SpaceLayout, StateVector, vector_dofs
from utils.mesh import interface_frame

logger = logging.getLogger(__name__)

STATE_BLOCKS = ("u", "h0", "h1", "w0", "w1")
INIT_KINDS = ("random", "pluck", "file")


def random_state(bundle: GeneratorBundle, seed: Union[int, np.random.Generator] = 0) -> np.ndarray:
    """Random reduced coordinates, normalized to |x|_H = 1."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = rng.standard_normal(bundle.dimension)
    return x / bundle.norm(x)


def interface_node_normals(layout: SpaceLayout) -> np.ndarray:
    """Unit normals (pointing into the solid) at the interface nodes, averaged over adjacent facets."""
    frame = interface_frame(layout.mesh)
    positions = np.searchsorted(layout.interface_nodes, layout.interface_facet_nodes)
    normals = np.zeros((layout.interface_nodes.size, layout.dimension))
    np.add.at(normals, positions, np.repeat(frame.normals[:, None, :], positions.shape[1], axis=1))
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def pluck_state(bundle: GeneratorBundle, center: Optional[np.ndarray] = None, width: float = 0.5,
                amplitude: float = 1.0) -> np.ndarray:
    """
    Interface pluck: a normal bump in h0 (and the matching trace of w0), everything else zero.

    Args:
        bundle: Generator bundle
        center: Bump center; defaults to the interface node with the largest first coordinate
        width: Gaussian width of the bump
        amplitude: Peak displacement

    Returns:
        np.ndarray: Reduced coordinates
    """
    layout = bundle.layout
    d = layout.dimension
    points = layout.node_coordinates[layout.interface_nodes]
    if center is None:
        center = points[np.argmax(points[:, 0])]
    bump = amplitude * np.exp(-np.sum((points - np.asarray(center)) ** 2, axis=1) / width ** 2)
    h0 = bump[:, None] * interface_node_normals(layout)

    displacement = np.zeros(layout.n_displacement)
    displacement[vector_dofs(layout.trace_positions(layout.solid_nodes), d)] = h0.ravel()
    return np.concatenate([np.zeros(bundle.n_fluid), displacement])


def save_state_csv(state: StateVector, path: str) -> None:
    """Write the five blocks of a (real) state."""
    frames = [pd.DataFrame({"block": name, "index": np.arange(values.size), "value": np.real(values)})
              for name, values in state.blocks().items()]
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.17g")
    logger.debug(f"State written to {path}")


def load_state_csv(path: str, layout: SpaceLayout) -> StateVector:
    """
    Read a state file written by :func:`save_state_csv`.

    Raises:
        DimensionError: block sizes differ from the layout
        ValueError: missing blocks or inconsistent traces
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [name for name in STATE_BLOCKS if name not in set(frame["block"])]
    if missing:
        raise ValueError(f"State file {path} lacks blocks {missing}")
    blocks = {}
    for name in STATE_BLOCKS:
        rows = frame[frame["block"] == name].sort_values("index")
        blocks[name] = rows["value"].to_numpy(dtype=float)
    return StateVector.from_blocks(layout, **blocks, atol=1e-10)


def sample_initial_state(bundle: GeneratorBundle, kind: str = "random", seed: int = 0,
                         path: Optional[str] = None, nulldata: Optional[NullspaceData] = None,
                         project: bool = False) -> np.ndarray:
    """
    Initial reduced state for an evolution run.

    Args:
        bundle: Generator bundle
        kind: One of INIT_KINDS
        seed: Seed of the random sampler
        path: State file for kind "file"
        nulldata: Needed when ``project`` is set
        project: Project onto N-perp

    Returns:
        np.ndarray: Reduced coordinates
    """
    if kind == "random":
        x = random_state(bundle, seed)
    elif kind == "pluck":
        x = pluck_state(bundle)
    elif kind == "file":
        if path is None:
            raise ValueError("Initial state kind 'file' needs a path")
        state = load_state_csv(path, bundle.layout)
        x = bundle.to_reduced(state)
    else:
        raise ValueError(f"Unknown initial state kind: {kind}. Supported kinds: {list(INIT_KINDS)}")
    if x.shape != (bundle.dimension,):
        raise DimensionError("initial state", bundle.dimension, x.shape)
    if project:
        if nulldata is None:
            raise ValueError("Projection onto N-perp needs the nullvector data")
        x = project_reduced(bundle, x, nulldata)
    return x
