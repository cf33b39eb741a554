"""
Shared fixtures: coarse reference geometries and their assembled operators.
"""
import os
import sys

import pytest
import yaml

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models.generator import build_generator
from models.nullspace_resolvent import build_nullvector, build_saddle
from models.pressure_elimination import build_leray
from utils.fem import assemble_forms, build_layout
from utils.mesh import make_reference_geometry


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: refinement studies on the finer reference meshes")


class Problem:
    """Mesh, layout, forms, reducer, bundle and steady state of one geometry."""

    def __init__(self, kind: str, resolution: int, lam: float = 1.0, mu: float = 1.0):
        self.mesh = make_reference_geometry(kind, resolution)
        self.layout = build_layout(self.mesh)
        self.forms = assemble_forms(self.mesh, self.layout, lam=lam, mu=mu)
        self.reducer = build_leray(self.layout, self.forms)
        self.bundle = build_generator(self.mesh, self.layout, self.forms, self.reducer)
        self.saddle = build_saddle(self.forms)
        self.nulldata = build_nullvector(self.forms, self.layout, saddle=self.saddle)


@pytest.fixture(scope="session")
def box():
    return Problem("box_in_box", 4)


@pytest.fixture(scope="session")
def annulus():
    return Problem("annulus_disc", 4)


@pytest.fixture(scope="session")
def annulus_levels():
    """Disc-in-annulus problems at the refinement resolutions 6, 8 and 12."""
    return {resolution: Problem("annulus_disc", resolution) for resolution in (6, 8, 12)}


@pytest.fixture(scope="session")
def skew_bundle(box):
    """Generator of the box problem with the viscous block switched off."""
    return build_generator(box.mesh, box.layout, box.forms, box.reducer, disable_dissipation=True)


def _write_config(path, output_dir, **sections):
    """Write a small YAML run configuration and return its path."""
    config = {
        "geometry": {"kind": "box_in_box", "resolution": 4},
        "evolution": {"T": 2.0, "dt": 0.1, "n_runs": 1},
        "spectrum": {"scan": {"beta_min": 0.0, "beta_max": 2.0, "steps": 3, "restrict": True}},
        "assumption": {"modes": 4},
        "output": {"directory": str(output_dir), "formats": ["json", "csv"]},
        "log_level": "WARNING",
    }
    for name, value in sections.items():
        if isinstance(value, dict) and isinstance(config.get(name), dict):
            config[name].update(value)
        else:
            config[name] = value
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config, f)
    return str(path)


@pytest.fixture
def config_file(tmp_path):
    """Factory writing a run configuration into tmp_path; outputs go to tmp_path/results."""
    def make(**sections):
        return _write_config(tmp_path / "config.yaml", tmp_path / "results", **sections)
    return make
