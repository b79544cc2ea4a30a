"""Scenario configuration: schema-validated JSON merged over packaged defaults.

A config file only needs the keys it overrides; everything else comes from
data/default_scenario.json.  Validation happens against the published JSON
schema before any run side effects, and errors carry the offending field path.
All units are SI (meters, radians, seconds, kg).
"""

from __future__ import annotations

import json
import math
from importlib import resources

import jsonschema

from .dynamics import PlantParams
from .kinematics import JOINT_NAMES, WorkspaceLimits
from .motion import AxisLimits
from .transmission import BeltParams


class ConfigError(Exception):
    pass


def _data_file(name: str):
    return resources.files("gantrysim.data") / name


def load_schema() -> dict:
    with _data_file("config.schema.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


def default_config() -> dict:
    with _data_file("default_scenario.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def validate_config(cfg: dict) -> None:
    """Schema-check a full config; raises ConfigError with the field path."""
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as err:
        raise ConfigError(f"invalid config at {err.json_path}: {err.message}") from err
    for axis in ("x", "y", "z"):
        lo, hi = cfg["workspace"][axis]
        if hi <= lo:
            raise ConfigError(f"invalid config at $.workspace.{axis}: max must exceed min")


def load_config(path=None) -> dict:
    """Read, merge over defaults, and validate a scenario config."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(
                f"config {path} is not valid JSON (line {err.lineno}, column {err.colno}): {err.msg}"
            ) from err
        if not isinstance(user, dict):
            raise ConfigError(f"config {path} must contain a JSON object")
        cfg = _deep_merge(cfg, user)
    validate_config(cfg)
    return cfg


def workspace_limits(cfg: dict) -> WorkspaceLimits:
    w = cfg["workspace"]
    return WorkspaceLimits(
        x=tuple(w["x"]),
        y=tuple(w["y"]),
        z=tuple(w["z"]),
        vmax_linear=w["vmax_linear"],
        vmax_angular=w["vmax_angular"],
        payload=w["payload"],
    )


def belt_params(cfg: dict) -> BeltParams:
    t = cfg["transmission"]
    return BeltParams(
        pulley_radius=t["pulley_radius"],
        x_gain=t["x_gain"],
        differential_sign=t["differential_sign"],
        wrist_gear_ratio=t["wrist_gear_ratio"],
    )


def plant_params(cfg: dict) -> PlantParams:
    p = cfg["plant"]
    rail_ei = math.inf if p["rail_EI"] == "rigid" else p["rail_EI"]
    return PlantParams(
        tip_mass=p["tip_mass"],
        rail_EI=rail_ei,
        damping_ratio=p["damping_ratio"],
        z_mount_offset=p["z_mount_offset"],
        accel_cap=p["accel_cap"],
        settle_tolerance=p["settle_tolerance"],
        z_travel=cfg["workspace"]["z"][1],
    )


def axis_limits(cfg: dict, tier: str) -> dict[str, AxisLimits]:
    """Per-axis limits for a speed tier ('fast' uses per-axis commanded speeds)."""
    speeds = cfg["speeds"]
    amax_lin = cfg["limits"]["amax_linear"]
    amax_wrist = cfg["limits"]["amax_wrist"]
    out = {}
    for axis in JOINT_NAMES:
        linear = axis in ("x", "y", "z")
        if tier == "fast":
            vmax = speeds["fast"][axis]
        elif tier == "slow":
            vmax = speeds["slow_linear"] if linear else speeds["slow_wrist"]
        else:
            raise ValueError("tier must be 'fast' or 'slow'")
        out[axis] = AxisLimits(vmax=vmax, amax=amax_lin if linear else amax_wrist)
    return out
