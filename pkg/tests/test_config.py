import json
import math

import pytest

from gantrysim.config import (
    ConfigError,
    axis_limits,
    belt_params,
    default_config,
    load_config,
    plant_params,
    validate_config,
    workspace_limits,
)


def test_default_config_is_valid():
    cfg = load_config(None)
    assert cfg["schema_version"] == 1
    assert cfg["workspace"]["x"] == [0.0, 1.2]


def test_defaults_match_design_specs():
    ws = workspace_limits(default_config())
    assert ws.x == (0.0, 1.2)
    assert ws.y == (0.0, 1.2)
    assert ws.z == (0.0, 1.0)
    assert ws.vmax_linear == 1.0
    assert ws.vmax_angular == 1.0
    assert ws.payload == 2.0


def test_partial_override_merges(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"plant": {"rail_EI": 60.0}}))
    cfg = load_config(p)
    assert cfg["plant"]["rail_EI"] == 60.0
    assert cfg["plant"]["tip_mass"] == 2.0  # untouched default


def test_unknown_key_rejected_with_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"plant": {"no_such_field": 1.0}}))
    with pytest.raises(ConfigError, match=r"\$\.plant"):
        load_config(p)


def test_bad_value_rejected_with_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"transmission": {"differential_sign": 2}}))
    with pytest.raises(ConfigError, match="differential_sign"):
        load_config(p)


def test_invalid_json_reports_line(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("{broken")
    with pytest.raises(ConfigError, match="line 1"):
        load_config(p)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/does/not/exist.json")


def test_degenerate_workspace_rejected():
    cfg = default_config()
    cfg["workspace"]["x"] = [1.0, 1.0]
    with pytest.raises(ConfigError, match="workspace"):
        validate_config(cfg)


def test_plant_params_rigid_sentinel(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"plant": {"rail_EI": "rigid"}}))
    params = plant_params(load_config(p))
    assert math.isinf(params.rail_EI)


def test_plant_params_z_travel_follows_workspace(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"workspace": {"z": [0.0, 0.8]}}))
    assert plant_params(load_config(p)).z_travel == 0.8


def test_belt_params_from_config():
    bp = belt_params(default_config())
    assert bp.pulley_radius == 0.02
    assert bp.differential_sign == 1


def test_axis_limits_tiers():
    cfg = default_config()
    fast = axis_limits(cfg, "fast")
    slow = axis_limits(cfg, "slow")
    assert fast["x"].vmax == 0.604
    assert fast["roll"].vmax == 1.547
    assert slow["x"].vmax == 0.05
    assert slow["roll"].vmax == 0.1
    assert fast["x"].amax == 2.0
    assert fast["roll"].amax == 4.0
    with pytest.raises(ValueError):
        axis_limits(cfg, "medium")
