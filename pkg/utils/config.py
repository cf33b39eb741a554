"""
Configuration loading and validation.

Run configurations are YAML files with one section per concern. Values
missing from the file fall back to DEFAULT_CONFIG, and command-line flags
override both through dotted keys such as ``evolution.dt``.
"""
import copy
import hashlib
import json
import logging
import os
from typing import Any, Dict, Optional

import yaml

from models.pressure_elimination import PRESSURE_BCS
from models.scheme_loader import SchemeLoader
from utils.errors import ConfigError
from utils.mesh import GEOMETRY_KINDS
from utils.state_builder import INIT_KINDS

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("json", "csv")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

DEFAULT_CONFIG: Dict[str, Any] = {
    "geometry": {"kind": "annulus_disc", "resolution": 8, "mesh_file": None},
    "material": {"lambda": 1.0, "mu": 1.0},
    "pressure_bc": "dirichlet",
    "tolerances": {
        "linear_tol": 1e-8,
        "null_tol": 1e-8,
        "gap_tol": 1e-6,
        "assumption_tol": 1e-3,
    },
    "evolution": {
        "T": 200.0,
        "dt": 0.05,
        "scheme": "midpoint",
        "init": "random",
        "init_file": None,
        "project_initial": True,
        "snapshot_every": 0,
        "n_runs": 5,
    },
    "spectrum": {
        "n_eigs": None,
        "shift": 0.0,
        "dense": None,
        "scan": {"beta_min": 0.0, "beta_max": 20.0, "steps": 41, "restrict": True},
    },
    "assumption": {"modes": 20, "compare": True, "compare_resolution": None},
    "seed": 0,
    "log_level": "INFO",
    "output": {"directory": "results", "formats": ["json", "csv"]},
}


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``update`` into a copy of ``base``."""
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def apply_overrides(config: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Apply dotted-key overrides (``None`` values are skipped)."""
    config = copy.deepcopy(config)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = config
        keys = dotted.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value
    return config


def parse_scan(text: str) -> Dict[str, Any]:
    """Parse ``beta_min:beta_max:steps``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError([f"spectrum.scan: expected beta_min:beta_max:steps, got '{text}'"])
    try:
        return {"beta_min": float(parts[0]), "beta_max": float(parts[1]), "steps": int(parts[2])}
    except ValueError as e:
        raise ConfigError([f"spectrum.scan: {e}"]) from e


def _positive(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0


def validate_config(config: Dict[str, Any]) -> None:
    """
    Check every field and raise one ConfigError listing all violations.

    Raises:
        ConfigError: one or more fields are invalid
    """
    violations = []
    geometry = config.get("geometry", {})
    if geometry.get("kind") not in GEOMETRY_KINDS:
        violations.append(f"geometry.kind: must be one of {list(GEOMETRY_KINDS)}, got {geometry.get('kind')!r}")
    resolution = geometry.get("resolution")
    if not isinstance(resolution, int) or isinstance(resolution, bool) or resolution < 4:
        violations.append(f"geometry.resolution: must be an integer >= 4, got {resolution!r}")

    material = config.get("material", {})
    if not _positive(material.get("mu")):
        violations.append(f"material.mu: must be > 0, got {material.get('mu')!r}")
    lam = material.get("lambda")
    if not isinstance(lam, (int, float)) or isinstance(lam, bool) or lam < 0:
        violations.append(f"material.lambda: must be >= 0, got {lam!r}")

    if config.get("pressure_bc") not in PRESSURE_BCS:
        violations.append(f"pressure_bc: must be one of {list(PRESSURE_BCS)}, got {config.get('pressure_bc')!r}")

    for name, value in config.get("tolerances", {}).items():
        if not _positive(value):
            violations.append(f"tolerances.{name}: must be > 0, got {value!r}")
    for name in DEFAULT_CONFIG["tolerances"]:
        if name not in config.get("tolerances", {}):
            violations.append(f"tolerances.{name}: missing")

    evolution = config.get("evolution", {})
    T, dt = evolution.get("T"), evolution.get("dt")
    if not _positive(T):
        violations.append(f"evolution.T: must be > 0, got {T!r}")
    if not _positive(dt):
        violations.append(f"evolution.dt: must be > 0, got {dt!r}")
    elif _positive(T) and dt >= T:
        violations.append(f"evolution.dt: must be smaller than T ({T}), got {dt}")
    if evolution.get("scheme") not in SchemeLoader.SUPPORTED_SCHEMES:
        violations.append(f"evolution.scheme: must be one of {SchemeLoader.get_supported_schemes()}, "
                          f"got {evolution.get('scheme')!r}")
    if evolution.get("init") not in INIT_KINDS:
        violations.append(f"evolution.init: must be one of {list(INIT_KINDS)}, got {evolution.get('init')!r}")
    snapshot_every = evolution.get("snapshot_every", 0)
    if not isinstance(snapshot_every, int) or snapshot_every < 0:
        violations.append(f"evolution.snapshot_every: must be a non-negative integer, got {snapshot_every!r}")

    scan = config.get("spectrum", {}).get("scan", {})
    if not isinstance(scan.get("steps"), int) or scan.get("steps", 0) < 1:
        violations.append(f"spectrum.scan.steps: must be a positive integer, got {scan.get('steps')!r}")
    elif scan.get("beta_max", 0.0) < scan.get("beta_min", 0.0):
        violations.append("spectrum.scan: beta_max must not be below beta_min")
    n_eigs = config.get("spectrum", {}).get("n_eigs")
    if n_eigs is not None and (not isinstance(n_eigs, int) or n_eigs < 1):
        violations.append(f"spectrum.n_eigs: must be a positive integer, got {n_eigs!r}")

    assumption = config.get("assumption", {})
    modes = assumption.get("modes")
    if not isinstance(modes, int) or modes < 1:
        violations.append(f"assumption.modes: must be a positive integer, got {modes!r}")
    if not isinstance(assumption.get("compare", True), bool):
        violations.append(f"assumption.compare: must be true or false, got {assumption.get('compare')!r}")
    compare_resolution = assumption.get("compare_resolution")
    if compare_resolution is not None and (not isinstance(compare_resolution, int)
                                           or isinstance(compare_resolution, bool) or compare_resolution < 4):
        violations.append(f"assumption.compare_resolution: must be null or an integer >= 4, "
                          f"got {compare_resolution!r}")

    if not isinstance(config.get("seed"), int) or isinstance(config.get("seed"), bool):
        violations.append(f"seed: an integer seed is required, got {config.get('seed')!r}")
    if str(config.get("log_level", "")).upper() not in LOG_LEVELS:
        violations.append(f"log_level: must be one of {list(LOG_LEVELS)}, got {config.get('log_level')!r}")

    formats = config.get("output", {}).get("formats", [])
    unknown = [f for f in formats if f not in OUTPUT_FORMATS]
    if unknown or not formats:
        violations.append(f"output.formats: must be a non-empty subset of {list(OUTPUT_FORMATS)}, got {formats!r}")

    if violations:
        raise ConfigError(violations)


def load_config(config_path: str, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Load configuration from a YAML file.

    Args:
        config_path: Path to the YAML file
        overrides: Dotted-key overrides from the command line

    Returns:
        Dict: Validated configuration

    Raises:
        FileNotFoundError: config file does not exist
        ConfigError: invalid YAML or invalid fields
    """
    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    with open(config_path, "r", encoding="utf-8") as f:
        try:
            loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError([f"{config_path}: not valid YAML ({e})"]) from e
    if not isinstance(loaded, dict):
        raise ConfigError([f"{config_path}: top level must be a mapping"])

    unknown = sorted(set(loaded) - set(DEFAULT_CONFIG))
    if unknown:
        raise ConfigError([f"{key}: unknown section" for key in unknown])

    config = apply_overrides(_merge(DEFAULT_CONFIG, loaded), overrides)
    validate_config(config)
    logger.debug(f"Loaded configuration from {config_path}")
    return config


def config_hash(config: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a configuration."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def comparison_resolution(config: Dict[str, Any]) -> Optional[int]:
    """
    Second mesh resolution for the assumption defect comparison.

    ``assumption.compare_resolution`` when set, otherwise about two thirds of
    the run resolution. None when comparison is off, the run reads a mesh
    file, or the second resolution equals the first.
    """
    assumption = config.get("assumption", {})
    geometry = config["geometry"]
    if not assumption.get("compare", True) or geometry.get("mesh_file"):
        return None
    resolution = geometry["resolution"]
    other = assumption.get("compare_resolution") or max(4, round(2 * resolution / 3))
    return None if other == resolution else int(other)
