"""Trajectory-error statistics and speed verification.

Desired and measured series are aligned by linear interpolation onto the
measured timestamps, split at the command-completion time, and reduced to
in-motion mean/std errors plus a post-motion static error.  Speed checks
report commanded vs. achieved peak speed with integer percent error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .kinematics import JOINT_NAMES


class NoOverlap(ValueError):
    pass


class EmptyWindow(ValueError):
    pass


class TooShort(ValueError):
    pass


@dataclass(frozen=True)
class ErrorStats:
    """In-motion and post-motion tracking error, mm for linear, rad for angular."""

    std_dev: float
    mean_error: float
    static_error: float
    motion_end: float
    unit: str  # "mm" or "rad"


@dataclass(frozen=True)
class SpeedRecord:
    axis: str
    commanded: float
    achieved: float
    percent_error: int

    def __post_init__(self) -> None:
        if self.commanded <= 0.0:
            raise ValueError("commanded speed must be > 0")


@dataclass(frozen=True)
class PairedSeries:
    """Desired resampled onto the measured timestamps (overlap only)."""

    t: np.ndarray
    desired: np.ndarray
    measured: np.ndarray


def align(desired_t, desired_v, measured_t, measured_v) -> PairedSeries:
    """Pair the series on the measured timestamps inside the common time span.

    Desired values are linearly interpolated; measured samples outside the
    overlap are dropped.
    """
    dt = np.asarray(desired_t, dtype=float)
    mt = np.asarray(measured_t, dtype=float)
    dv = np.asarray(desired_v, dtype=float)
    mv = np.asarray(measured_v, dtype=float)
    lo = max(dt[0], mt[0])
    hi = min(dt[-1], mt[-1])
    if hi < lo:
        raise NoOverlap("series do not overlap in time")
    keep = (mt >= lo) & (mt <= hi)
    if not np.any(keep):
        raise NoOverlap("no measured samples inside the overlap")
    t = mt[keep]
    if dv.ndim == 1:
        des = np.interp(t, dt, dv)
    else:
        des = np.stack([np.interp(t, dt, dv[:, j]) for j in range(dv.shape[1])], axis=1)
    return PairedSeries(t=t, desired=des, measured=mv[keep])


def _scalar_errors(paired: PairedSeries) -> np.ndarray:
    """Signed error for scalar series, Euclidean norm for vector series."""
    diff = paired.desired - paired.measured
    if diff.ndim == 1:
        return diff
    return np.linalg.norm(diff, axis=1)


def error_stats(
    paired: PairedSeries,
    motion_end: float,
    kind: str = "linear",
    signed_std: bool = True,
) -> ErrorStats:
    """Reduce a paired series to Table-style statistics.

    Over t < motion_end: mean absolute error and the standard deviation of
    the signed error (of the absolute error with signed_std=False).  Over
    t >= motion_end: static error, the mean absolute error at rest.  Linear
    series are reported in mm, angular in rad.
    """
    if kind not in ("linear", "angular"):
        raise ValueError("kind must be 'linear' or 'angular'")
    in_motion = paired.t < motion_end
    at_rest = ~in_motion
    if not np.any(in_motion) or not np.any(at_rest):
        raise EmptyWindow("paired series must span both sides of motion_end")
    err = _scalar_errors(paired)
    scale = 1000.0 if kind == "linear" else 1.0
    spread = err[in_motion] if signed_std else np.abs(err[in_motion])
    return ErrorStats(
        std_dev=float(np.std(spread)) * scale,
        mean_error=float(np.mean(np.abs(err[in_motion]))) * scale,
        static_error=float(np.mean(np.abs(err[at_rest]))) * scale,
        motion_end=float(motion_end),
        unit="mm" if kind == "linear" else "rad",
    )


def round_half_away_from_zero(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0.0 else int(math.ceil(x - 0.5))


def speed_error(axis: str, commanded: float, achieved: float) -> SpeedRecord:
    """Integer percent error 100*(commanded - achieved)/commanded.

    Negative values mean the axis overshot its commanded speed; rounding is
    half away from zero to match integer-percent presentation.
    """
    percent = round_half_away_from_zero(100.0 * (commanded - achieved) / commanded)
    return SpeedRecord(axis=axis, commanded=commanded, achieved=achieved, percent_error=percent)


def _median_filter(values: np.ndarray, width: int = 5) -> np.ndarray:
    half = width // 2
    padded = np.concatenate([np.repeat(values[0], half), values, np.repeat(values[-1], half)])
    return np.median(sliding_window_view(padded, width), axis=1)


def achieved_speed(trace, axis: str) -> float:
    """Peak median-filtered central-difference speed of the actual signal."""
    col = JOINT_NAMES.index(axis)
    t = np.asarray(trace.t, dtype=float)
    if len(t) < 2:
        raise TooShort("need at least 2 samples to differentiate")
    v = np.gradient(np.asarray(trace.actual)[:, col], t)
    if len(v) >= 5:
        v = _median_filter(v, 5)
    return float(np.max(np.abs(v)))


def infer_motion_end(t: np.ndarray, desired: np.ndarray, speed_floor: float = 1e-3,
                     hold: float = 0.5) -> float:
    """Fallback completion time for external traces: last instant before the
    commanded speed stays below speed_floor (1 mm/s) for at least ``hold`` s."""
    t = np.asarray(t, dtype=float)
    des = np.asarray(desired, dtype=float)
    if des.ndim == 1:
        des = des[:, None]
    speed = np.linalg.norm(np.gradient(des, t, axis=0), axis=1)
    moving = speed >= speed_floor
    if not np.any(moving):
        return float(t[0])
    last = int(np.nonzero(moving)[0][-1])
    end = min(last + 1, len(t) - 1)
    if t[-1] - t[end] < hold:
        return float(t[last])
    return float(t[end])


def summarize(
    error_rows: Sequence[tuple[str, ErrorStats]],
    speed_rows: Sequence[SpeedRecord] = (),
) -> dict:
    """Assemble the error table plus the speed block into one report document.

    Pure function of its inputs: identical rows give a byte-identical report
    once serialized with sorted keys.
    """
    return {
        "schema_version": 1,
        "error_table": [
            {
                "name": name,
                "std_dev": stats.std_dev,
                "mean_error": stats.mean_error,
                "static_error": stats.static_error,
                "unit": stats.unit,
            }
            for name, stats in error_rows
        ],
        "speed_table": [
            {
                "axis": rec.axis,
                "commanded": rec.commanded,
                "achieved": rec.achieved,
                "percent_error": rec.percent_error,
            }
            for rec in speed_rows
        ],
    }


def render_text(report: dict) -> str:
    """Aligned-column plain-text rendering of a summarize() report."""
    lines = []
    lines.append("Tracking error summary")
    lines.append(f"{'run':<24}{'std dev':>12}{'mean error':>12}{'static error':>14}  unit")
    for row in report["error_table"]:
        lines.append(
            f"{row['name']:<24}{row['std_dev']:>12.3f}{row['mean_error']:>12.3f}"
            f"{row['static_error']:>14.3e}  {row['unit']}"
        )
    if not report["error_table"]:
        lines.append("(no runs)")
    lines.append("")
    lines.append("Speed summary")
    lines.append(f"{'axis':<12}{'commanded':>12}{'achieved':>12}{'% error':>9}")
    for row in report["speed_table"]:
        lines.append(
            f"{row['axis']:<12}{row['commanded']:>12.3f}{row['achieved']:>12.3f}"
            f"{row['percent_error']:>8d}%"
        )
    if not report["speed_table"]:
        lines.append("(no runs)")
    lines.append("")
    return "\n".join(lines)


def load_external_trace(path, mapping: dict[str, str]) -> dict[str, np.ndarray]:
    """Read a foreign CSV (e.g. motion capture) with a column-name mapping.

    ``mapping`` sends our field names ("t", "act_x", "des_x", ...) to the
    file's column headers; only mapped columns are returned.
    """
    data = np.genfromtxt(path, delimiter=",", names=True)
    out = {}
    for ours, theirs in mapping.items():
        if theirs not in (data.dtype.names or ()):
            raise KeyError(f"column '{theirs}' not in {path}")
        out[ours] = np.asarray(data[theirs], dtype=float)
    return out
