import json
import math

import numpy as np
import pytest

from gantrysim.dynamics import PlantParams, default_limits, simulate
from gantrysim.evaluation import (
    EmptyWindow,
    ErrorStats,
    NoOverlap,
    PairedSeries,
    SpeedRecord,
    TooShort,
    achieved_speed,
    align,
    error_stats,
    infer_motion_end,
    load_external_trace,
    render_text,
    round_half_away_from_zero,
    speed_error,
    summarize,
)
from gantrysim.kinematics import JointState
from gantrysim.motion import WaypointPath


def test_align_identical_series():
    t = np.linspace(0, 1, 50)
    v = np.sin(t)
    paired = align(t, v, t, v)
    np.testing.assert_array_equal(paired.desired, paired.measured)
    assert np.max(np.abs(paired.desired - paired.measured)) == 0.0


def test_align_linear_ramp_exact():
    # linear interpolation reproduces linear signals exactly
    dt = np.arange(0, 1.0001, 1 / 100)  # desired at 100 Hz
    mt = np.arange(0, 1.0001, 1 / 120)  # measured at 120 Hz
    ramp = lambda t: 0.25 + 0.5 * t
    paired = align(dt, ramp(dt), mt, ramp(mt))
    assert np.max(np.abs(paired.desired - paired.measured)) < 1e-12


def test_align_piecewise_matches_dense_oracle():
    # oracle: resample desired onto a 10 kHz grid first, then read it back at
    # measured timestamps that sit exactly on that grid
    dt = np.linspace(0.0, 2.0, 41)
    dv = np.abs(np.sin(3 * dt)) + 0.1 * dt  # piecewise-smooth with a kink
    dense_t = np.arange(0.0, 2.0001, 1e-4)
    dense_v = np.interp(dense_t, dt, dv)
    mt = dense_t[::137]
    mv = np.zeros_like(mt)
    paired = align(dt, dv, mt, mv)
    oracle = dense_v[::137]
    np.testing.assert_allclose(paired.desired, oracle, atol=1e-9)


def test_align_drops_non_overlapping_samples():
    paired = align([0.0, 1.0], [0.0, 1.0], [-0.5, 0.25, 0.75, 1.5], [0, 0, 0, 0])
    np.testing.assert_array_equal(paired.t, [0.25, 0.75])


def test_align_no_overlap_raises():
    with pytest.raises(NoOverlap):
        align([0.0, 1.0], [0, 0], [2.0, 3.0], [0, 0])


def test_align_vector_series():
    t = np.linspace(0, 1, 30)
    dv = np.stack([t, 2 * t, 3 * t], axis=1)
    paired = align(t, dv, t[::2], dv[::2])
    np.testing.assert_allclose(paired.desired, paired.measured, atol=1e-12)


def test_error_stats_identical_all_zero():
    t = np.linspace(0, 2, 100)
    paired = PairedSeries(t, np.sin(t), np.sin(t))
    stats = error_stats(paired, motion_end=1.0)
    assert stats.std_dev == 0.0
    assert stats.mean_error == 0.0
    assert stats.static_error == 0.0


def test_error_stats_constant_offset_case():
    # +5 mm during motion, 0 after: mean 5 mm, std 0, static 0
    t = np.linspace(0, 2, 201)
    desired = np.ones_like(t)
    measured = desired.copy()
    measured[t < 1.0] -= 0.005
    paired = PairedSeries(t, desired, measured)
    stats = error_stats(paired, motion_end=1.0, kind="linear")
    assert stats.mean_error == pytest.approx(5.0)
    assert stats.std_dev == pytest.approx(0.0, abs=1e-12)
    assert stats.static_error == pytest.approx(0.0, abs=1e-12)
    assert stats.unit == "mm"


def test_error_stats_brute_force_oracle():
    rng = np.random.default_rng(61)
    for _ in range(100):
        n = rng.integers(50, 200)
        t = np.sort(rng.uniform(0, 3, n))
        motion_end = rng.uniform(t[2], t[-3])
        desired = rng.normal(0, 1, n)
        measured = desired + rng.normal(0, 0.01, n)
        paired = PairedSeries(t, desired, measured)
        stats = error_stats(paired, motion_end, kind="angular")
        err = desired - measured
        pre = err[t < motion_end]
        post = err[t >= motion_end]
        assert stats.mean_error == pytest.approx(np.mean(np.abs(pre)), abs=1e-12)
        assert stats.std_dev == pytest.approx(np.std(pre), abs=1e-12)
        assert stats.static_error == pytest.approx(np.mean(np.abs(post)), abs=1e-12)
        assert stats.unit == "rad"


def test_error_stats_signed_flag():
    t = np.linspace(0, 2, 100)
    desired = np.zeros_like(t)
    measured = np.where(t < 1.0, np.where(t < 0.5, 0.001, -0.001), 0.0)
    paired = PairedSeries(t, desired, measured)
    signed = error_stats(paired, 1.0, signed_std=True)
    unsigned = error_stats(paired, 1.0, signed_std=False)
    assert signed.std_dev > unsigned.std_dev  # sign flips only show up in signed std
    assert signed.mean_error == unsigned.mean_error


def test_error_stats_time_shift_invariant():
    t = np.linspace(0, 2, 150)
    desired = np.sin(t)
    measured = np.sin(t) + 0.002
    a = error_stats(PairedSeries(t, desired, measured), 1.0)
    b = error_stats(PairedSeries(t + 10.0, desired, measured), 11.0)
    assert a == ErrorStats(b.std_dev, b.mean_error, b.static_error, 1.0, b.unit)


def test_error_stats_empty_window():
    t = np.linspace(0, 1, 10)
    paired = PairedSeries(t, t, t)
    with pytest.raises(EmptyWindow):
        error_stats(paired, motion_end=2.0)
    with pytest.raises(EmptyWindow):
        error_stats(paired, motion_end=-1.0)


def test_round_half_away_from_zero():
    assert round_half_away_from_zero(0.5) == 1
    assert round_half_away_from_zero(-0.5) == -1
    assert round_half_away_from_zero(2.4) == 2
    assert round_half_away_from_zero(-2.5) == -3
    assert round_half_away_from_zero(0.0) == 0


def test_speed_error_reference_rows():
    # published commanded/achieved verification pairs and their percent column
    rows = [
        ("x", 0.604, 0.572, 5),
        ("y", 0.531, 0.493, 7),
        ("z", 0.512, 0.472, 8),
        ("roll", 1.547, 1.687, -9),
        ("pitch", 1.536, 1.531, 0),
        ("yaw", 1.593, 1.660, -4),
    ]
    for axis, commanded, achieved, expected in rows:
        rec = speed_error(axis, commanded, achieved)
        assert rec.percent_error == expected, axis


def test_speed_error_zero_for_exact():
    for v in (0.1, 0.57, 1.0, 2.5):
        assert speed_error("x", v, v).percent_error == 0


def test_speed_record_requires_positive_command():
    with pytest.raises(ValueError):
        SpeedRecord("x", 0.0, 0.1, 0)


class _FakeTrace:
    def __init__(self, t, actual):
        self.t = np.asarray(t, dtype=float)
        self.actual = np.asarray(actual, dtype=float)


def _trace_from_column(t, col, axis_idx=0):
    actual = np.zeros((len(t), 6))
    actual[:, axis_idx] = col
    return _FakeTrace(t, actual)


def test_achieved_speed_linear_ramp():
    t = np.linspace(0, 2, 500)
    trace = _trace_from_column(t, 0.5 * t)
    assert achieved_speed(trace, "x") == pytest.approx(0.5, abs=1e-9)


def test_achieved_speed_stationary():
    t = np.linspace(0, 1, 100)
    trace = _trace_from_column(t, np.full_like(t, 0.3))
    assert achieved_speed(trace, "x") == pytest.approx(0.0, abs=1e-12)


def test_achieved_speed_triangular_profile():
    params = PlantParams(rail_EI=math.inf, accel_cap=0.27)
    path = WaypointPath.from_states([JointState(0, 0.5, 0.5), JointState(1.2, 0.5, 0.5)])
    trace = simulate(path, default_limits(), params, tail=0.5)
    assert achieved_speed(trace, "x") == pytest.approx(0.57, abs=0.005)


def test_achieved_speed_too_short():
    with pytest.raises(TooShort):
        achieved_speed(_trace_from_column([0.0], [0.0]), "x")


def test_summarize_empty_is_valid_document():
    report = summarize([], [])
    assert report["error_table"] == []
    assert report["speed_table"] == []
    text = render_text(report)
    assert "(no runs)" in text
    json.dumps(report)  # serializable


def test_summarize_single_run_verbatim():
    stats = ErrorStats(1.5, 2.5, 0.25, 3.0, "mm")
    report = summarize([("x_fast_high", stats)])
    row = report["error_table"][0]
    assert row == {
        "name": "x_fast_high",
        "std_dev": 1.5,
        "mean_error": 2.5,
        "static_error": 0.25,
        "unit": "mm",
    }


def test_summarize_speed_block_percent_column():
    pairs = [
        ("x", 0.604, 0.572), ("y", 0.531, 0.493), ("z", 0.512, 0.472),
        ("roll", 1.547, 1.687), ("pitch", 1.536, 1.531), ("yaw", 1.593, 1.660),
    ]
    report = summarize([], [speed_error(a, c, v) for a, c, v in pairs])
    assert [r["percent_error"] for r in report["speed_table"]] == [5, 7, 8, -9, 0, -4]


def test_summarize_pure_function():
    stats = ErrorStats(1.0, 2.0, 0.1, 1.0, "mm")
    rows = [("a", stats)]
    speed = [speed_error("x", 1.0, 0.9)]
    r1 = json.dumps(summarize(rows, speed), sort_keys=True)
    r2 = json.dumps(summarize(rows, speed), sort_keys=True)
    assert r1 == r2


def test_infer_motion_end():
    t = np.linspace(0, 4, 1000)
    desired = np.clip(t, 0.0, 1.5)  # moves for 1.5 s then holds
    end = infer_motion_end(t, desired)
    assert end == pytest.approx(1.5, abs=0.01)


def test_load_external_trace(tmp_path):
    p = tmp_path / "mocap.csv"
    p.write_text("time,px,py\n0.0,1.0,2.0\n0.1,1.1,2.1\n")
    cols = load_external_trace(p, {"t": "time", "act_x": "px"})
    np.testing.assert_allclose(cols["t"], [0.0, 0.1])
    np.testing.assert_allclose(cols["act_x"], [1.0, 1.1])
    with pytest.raises(KeyError):
        load_external_trace(p, {"t": "nope"})
