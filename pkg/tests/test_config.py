"""
Tests for configuration loading and validation.
"""
import os

import pytest

from utils.config import (
    DEFAULT_CONFIG,
    apply_overrides,
    comparison_resolution,
    config_hash,
    load_config,
    parse_scan,
    validate_config,
)
from utils.errors import ConfigError

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


@pytest.mark.parametrize("name", ["default_config.yaml", "quick_test_config.yaml", "comprehensive_config.yaml"])
def test_shipped_configs_are_valid(name):
    config = load_config(os.path.join(CONFIG_DIR, name))
    assert set(config) == set(DEFAULT_CONFIG)
    assert isinstance(config["tolerances"]["linear_tol"], float)


def test_defaults_fill_missing_sections(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("geometry:\n  kind: box_in_box\n")
    config = load_config(str(path))
    assert config["geometry"] == {"kind": "box_in_box", "resolution": 8, "mesh_file": None}
    assert config["evolution"]["scheme"] == "midpoint"


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("")
    assert load_config(str(path)) == DEFAULT_CONFIG


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config("no/such/config.yaml")


def test_invalid_yaml(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("geometry: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_top_level_must_be_mapping(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_unknown_section(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("solver:\n  kind: direct\n")
    with pytest.raises(ConfigError) as excinfo:
        load_config(str(path))
    assert excinfo.value.violations == ["solver: unknown section"]


def test_every_violation_is_reported(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("material:\n  mu: 0.0\n  lambda: -1.0\nevolution:\n  dt: -0.1\n  scheme: rk4\n")
    with pytest.raises(ConfigError) as excinfo:
        load_config(str(path))
    fields = [v.split(":")[0] for v in excinfo.value.violations]
    assert fields == ["material.mu", "material.lambda", "evolution.dt", "evolution.scheme"]


def test_validate_rejects_bad_geometry_and_formats():
    config = apply_overrides(DEFAULT_CONFIG, {"geometry.kind": "torus", "geometry.resolution": 2,
                                              "output.formats": ["xml"], "pressure_bc": "none",
                                              "assumption.compare_resolution": 2})
    with pytest.raises(ConfigError) as excinfo:
        validate_config(config)
    fields = {v.split(":")[0] for v in excinfo.value.violations}
    assert {"geometry.kind", "geometry.resolution", "output.formats", "pressure_bc",
            "assumption.compare_resolution"} <= fields


def test_overrides_use_dotted_keys():
    config = apply_overrides(DEFAULT_CONFIG, {"evolution.dt": 0.01, "seed": None, "spectrum.scan.steps": 3})
    assert config["evolution"]["dt"] == 0.01
    assert config["seed"] == DEFAULT_CONFIG["seed"]
    assert config["spectrum"]["scan"]["steps"] == 3
    assert DEFAULT_CONFIG["evolution"]["dt"] == 0.05


def test_overrides_are_validated(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("")
    with pytest.raises(ConfigError):
        load_config(str(path), {"evolution.dt": 500.0})


def test_parse_scan():
    assert parse_scan("0:10:21") == {"beta_min": 0.0, "beta_max": 10.0, "steps": 21}
    with pytest.raises(ConfigError):
        parse_scan("0:10")
    with pytest.raises(ConfigError):
        parse_scan("a:b:c")


def test_config_hash_is_canonical():
    reordered = dict(reversed(list(DEFAULT_CONFIG.items())))
    assert config_hash(reordered) == config_hash(DEFAULT_CONFIG)
    assert config_hash(apply_overrides(DEFAULT_CONFIG, {"seed": 1})) != config_hash(DEFAULT_CONFIG)


def test_assumption_defaults():
    assert DEFAULT_CONFIG["tolerances"]["assumption_tol"] == 1e-3
    for name in ("default_config.yaml", "comprehensive_config.yaml"):
        assert load_config(os.path.join(CONFIG_DIR, name))["tolerances"]["assumption_tol"] == 1e-3


@pytest.mark.parametrize("overrides, expected", [
    ({}, 5),
    ({"geometry.resolution": 12}, 8),
    ({"assumption.compare_resolution": 10}, 10),
    ({"assumption.compare_resolution": 8}, None),
    ({"assumption.compare": False}, None),
    ({"geometry.resolution": 4}, None),
    ({"geometry.mesh_file": "mesh.txt"}, None),
])
def test_comparison_resolution(overrides, expected):
    assert comparison_resolution(apply_overrides(DEFAULT_CONFIG, overrides)) == expected
