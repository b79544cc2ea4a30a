"""Acceleration-limited motion profiles, multi-axis synchronization, test paths.

Profiles are trapezoidal-velocity (constant-acceleration ramps with an optional
cruise), the same second-order family firmware stepper planners expose.  A move
too short to reach cruise speed degenerates to a triangular profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import JOINT_NAMES, JointState, WorkspaceLimits, validate_workspace


class CurveExceedsWorkspace(ValueError):
    pass


@dataclass(frozen=True)
class AxisLimits:
    vmax: float  # units/s
    amax: float  # units/s^2

    def __post_init__(self) -> None:
        if self.vmax <= 0.0 or self.amax <= 0.0:
            raise ValueError("vmax and amax must be > 0")


@dataclass(frozen=True)
class MotionProfile:
    """Piecewise constant-acceleration move: accel, cruise, decel.

    v_peak and a carry the sign of the move; a zero-distance profile has all
    phase durations zero (or a pure hold when used as a coordination filler).
    """

    start: float
    distance: float
    t_accel: float
    t_cruise: float
    t_decel: float
    v_peak: float
    a: float

    @property
    def duration(self) -> float:
        return self.t_accel + self.t_cruise + self.t_decel

    @property
    def end(self) -> float:
        return self.start + self.distance

    def sample_array(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(position, velocity, acceleration) at each time; clamps past the end."""
        t = np.asarray(t, dtype=float)
        t1 = self.t_accel
        t2 = self.t_accel + self.t_cruise
        t3 = self.duration
        tc = np.clip(t, 0.0, None)

        pos = np.full(t.shape, self.start, dtype=float)
        vel = np.zeros(t.shape)
        acc = np.zeros(t.shape)

        m = tc < t1
        pos[m] = self.start + 0.5 * self.a * tc[m] ** 2
        vel[m] = self.a * tc[m]
        acc[m] = self.a

        m = (tc >= t1) & (tc < t2)
        d_acc = 0.5 * self.a * t1**2
        pos[m] = self.start + d_acc + self.v_peak * (tc[m] - t1)
        vel[m] = self.v_peak
        acc[m] = 0.0

        m = (tc >= t2) & (tc < t3)
        tau = t3 - tc[m]
        pos[m] = self.end - 0.5 * self.a * tau**2
        vel[m] = self.a * tau
        acc[m] = -self.a

        m = tc >= t3
        pos[m] = self.end
        vel[m] = 0.0
        acc[m] = 0.0
        return pos, vel, acc

    def sample(self, t: float) -> tuple[float, float, float]:
        """(position, velocity, acceleration) at time t seconds."""
        p, v, a = self.sample_array(np.array([t]))
        return float(p[0]), float(v[0]), float(a[0])

    def stretched(self, duration: float) -> "MotionProfile":
        """Uniform time-scaling to a longer duration; displacement is preserved.

        Scaling time by lam divides v_peak by lam and a by lam**2, so the
        stretched profile stays inside any limits the original satisfied.
        """
        t0 = self.duration
        if t0 <= 0.0:
            return hold_profile(self.start, duration)
        lam = duration / t0
        if lam < 1.0 - 1e-12:
            raise ValueError("can only stretch to a longer duration")
        return MotionProfile(
            start=self.start,
            distance=self.distance,
            t_accel=self.t_accel * lam,
            t_cruise=self.t_cruise * lam,
            t_decel=self.t_decel * lam,
            v_peak=self.v_peak / lam,
            a=self.a / lam**2,
        )


def hold_profile(position: float, duration: float = 0.0) -> MotionProfile:
    """Zero-distance profile holding a position for a given duration."""
    return MotionProfile(position, 0.0, 0.0, duration, 0.0, 0.0, 0.0)


def plan_trapezoid(distance: float, lim: AxisLimits, start: float = 0.0) -> MotionProfile:
    """Minimal-time profile over a signed distance under the axis limits.

    Trapezoidal when the move is long enough to reach vmax (the standard
    condition vmax**2/amax <= |distance|), triangular otherwise with
    v_peak = sqrt(amax * |distance|).  Zero distance degenerates to a
    zero-duration profile.
    """
    if distance == 0.0:
        return hold_profile(start)
    sign = math.copysign(1.0, distance)
    d = abs(distance)
    if lim.vmax**2 / lim.amax <= d:
        t_ramp = lim.vmax / lim.amax
        t_cruise = (d - lim.vmax**2 / lim.amax) / lim.vmax
        v_peak = lim.vmax
    else:
        v_peak = math.sqrt(lim.amax * d)
        t_ramp = v_peak / lim.amax
        t_cruise = 0.0
    return MotionProfile(
        start=start,
        distance=distance,
        t_accel=t_ramp,
        t_cruise=t_cruise,
        t_decel=t_ramp,
        v_peak=sign * v_peak,
        a=sign * lim.amax,
    )


def plan_coordinated(
    start: JointState, goal: JointState, lims: dict[str, AxisLimits]
) -> dict[str, MotionProfile]:
    """Per-axis profiles from start to goal, all finishing simultaneously.

    The slowest axis's minimal-time profile fixes the move duration; every
    other axis is time-stretched to match, which only lowers its peak speed
    and acceleration.  Axes that do not move become pure holds.
    """
    minimal = {
        axis: plan_trapezoid(getattr(goal, axis) - getattr(start, axis), lims[axis],
                             start=getattr(start, axis))
        for axis in JOINT_NAMES
    }
    duration = max(p.duration for p in minimal.values())
    return {axis: p.stretched(duration) for axis, p in minimal.items()}


@dataclass(frozen=True)
class Waypoint:
    """Path vertex; payload is the mass carried on the leg leaving it."""

    joints: JointState
    payload: float = 0.0
    label: str = ""


@dataclass(frozen=True)
class WaypointPath:
    waypoints: tuple[Waypoint, ...]

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise ValueError("a path needs at least two waypoints")

    def legs(self) -> list[tuple[Waypoint, Waypoint]]:
        return list(zip(self.waypoints[:-1], self.waypoints[1:]))

    @classmethod
    def from_states(cls, states, payload=0.0) -> "WaypointPath":
        return cls(tuple(Waypoint(q, payload=payload) for q in states))


@dataclass(frozen=True)
class LemniscatePath:
    """Bernoulli lemniscate in the X-Y plane, closed over one period.

    x(t) = cx + scale * cos(th) / (1 + sin(th)^2)
    y(t) = cy + scale * sin(th) cos(th) / (1 + sin(th)^2),  th = 2*pi*t/period.
    z is fixed at ``height`` or, in the multi-plane variant, modulated
    sinusoidally by ``z_amplitude`` around it.
    """

    scale: float
    height: float
    period: float
    center: tuple[float, float] = (0.6, 0.6)
    z_amplitude: float = 0.0
    wrist: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.scale <= 0.0 or self.period <= 0.0:
            raise ValueError("scale and period must be > 0")

    @property
    def multi_plane(self) -> bool:
        return self.z_amplitude != 0.0

    def positions(self, t: np.ndarray) -> np.ndarray:
        """(n, 3) curve positions at the given times."""
        th = 2.0 * math.pi * np.asarray(t, dtype=float) / self.period
        denom = 1.0 + np.sin(th) ** 2
        x = self.center[0] + self.scale * np.cos(th) / denom
        y = self.center[1] + self.scale * np.sin(th) * np.cos(th) / denom
        z = self.height + self.z_amplitude * np.sin(th)
        return np.stack([x, y, z], axis=1)

    def arc_length(self, samples: int = 20_000) -> float:
        t = np.linspace(0.0, self.period, samples)
        p = self.positions(t)
        return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))

    def point(self, t: float) -> JointState:
        p = self.positions(np.array([t]))[0]
        return JointState(p[0], p[1], p[2], *self.wrist)


def lemniscate_path(
    scale: float,
    height: float,
    period: float,
    z_amplitude: float = 0.0,
    center: tuple[float, float] = (0.6, 0.6),
    wrist: tuple[float, float, float] = (0.0, 0.0, 0.0),
    limits: WorkspaceLimits | None = None,
) -> LemniscatePath:
    """Build a lemniscate sampler, checking it fits the workspace box."""
    path = LemniscatePath(scale, height, period, center, z_amplitude, wrist)
    if limits is not None:
        t = np.linspace(0.0, period, 4096)
        pts = path.positions(t)
        for i, axis in enumerate(("x", "y", "z")):
            lo, hi = limits.bounds(axis)
            if pts[:, i].min() < lo - 1e-12 or pts[:, i].max() > hi + 1e-12:
                raise CurveExceedsWorkspace(f"curve leaves the workspace on {axis}")
    return path


def pick_run_path(
    start: JointState,
    pick: JointState,
    place: JointState,
    retract_z: float,
    payload: float = 1.0,
    limits: WorkspaceLimits | None = None,
) -> WaypointPath:
    """Pick-and-place waypoint sequence with the Z axis raised between moves.

    start -> descend to pick -> lift -> traverse -> descend to place -> lift ->
    return to start.  All horizontal translations happen at retract_z, so the
    path's z maximum between the vertical legs equals the retract height.
    """
    above_pick = pick.replace(z=retract_z)
    above_place = place.replace(z=retract_z)
    waypoints = (
        Waypoint(start, 0.0, "start"),
        Waypoint(above_pick, 0.0, "approach_pick"),
        Waypoint(pick, payload, "pick"),
        Waypoint(above_pick, payload, "lift_pick"),
        Waypoint(above_place, payload, "approach_place"),
        Waypoint(place, 0.0, "place"),
        Waypoint(above_place, 0.0, "lift_place"),
        Waypoint(start, 0.0, "return"),
    )
    if limits is not None:
        for w in waypoints:
            violations = validate_workspace(w.joints, limits)
            if violations:
                axes = ", ".join(v.axis for v in violations)
                raise CurveExceedsWorkspace(f"waypoint '{w.label}' outside workspace on {axes}")
    return WaypointPath(waypoints)
