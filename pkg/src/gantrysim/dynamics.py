"""Plant simulation: rigid carriage tracking plus a flexible Z-rail pendulum.

The slender Z rails act as a tip-loaded cantilever below the Y carriage, so
lateral carriage acceleration rings the end effector.  Deflection per lateral
axis is modeled as one dominant oscillator mode driven by base acceleration,
with stiffness k = 3*EI/L^3 falling off as the rails extend.  Belt slip under
hard acceleration is modeled as a clamp on the commanded acceleration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .kinematics import JOINT_NAMES, JointState, WorkspaceLimits, validate_workspace
from .motion import AxisLimits, LemniscatePath, WaypointPath, plan_coordinated, plan_trapezoid
from .transmission import BeltParams, DesyncProfile, coupling_shift

INTERNAL_DT = 1e-4  # s, plant integration step
MIN_EXTENSION = 1e-3  # m, pendulum length floor when fully retracted
MAX_STEP_DT = 2e-3  # s, upper bound for a single step() call


class NonPositiveExtension(ValueError):
    pass


class StepTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class PlantParams:
    tip_mass: float = 2.0  # kg, carried mass at the rail tip
    rail_EI: float = 120.0  # N*m^2 flexural rigidity; inf = rigid plant
    damping_ratio: float = 0.04
    z_mount_offset: float = 0.15  # m of rail below the carriage at z = z_travel
    accel_cap: float | None = 0.27  # m/s^2 clamp on linear axes; None = uncapped
    settle_tolerance: float = 1e-3  # m
    z_travel: float = 1.0  # m, z range top; extension grows as z drops below it

    def __post_init__(self) -> None:
        if self.tip_mass <= 0.0:
            raise ValueError("tip_mass must be > 0")
        if self.rail_EI <= 0.0:
            raise ValueError("rail_EI must be > 0")
        if not 0.0 <= self.damping_ratio < 1.0:
            raise ValueError("damping_ratio must be in [0, 1)")
        if self.accel_cap is not None and self.accel_cap <= 0.0:
            raise ValueError("accel_cap must be > 0 or None")

    def extension(self, z: float) -> float:
        """Pendulum length below the carriage at height z; low z = long rails."""
        return max(self.z_mount_offset + self.z_travel - z, MIN_EXTENSION)


def cantilever_stiffness(extension_l: float, params: PlantParams) -> float:
    """Tip-loaded cantilever stiffness k = 3*EI/L^3 in N/m."""
    if extension_l <= 0.0:
        raise NonPositiveExtension("extension must be > 0")
    return 3.0 * params.rail_EI / extension_l**3


def natural_frequency(k: float, m: float) -> float:
    """Undamped natural frequency sqrt(k/m)/(2*pi) in Hz."""
    if k <= 0.0 or m <= 0.0:
        raise ValueError("k and m must be > 0")
    return math.sqrt(k / m) / (2.0 * math.pi)


@dataclass(frozen=True)
class PlantState:
    carriage: JointState = field(default_factory=JointState)
    deflection: tuple[float, float] = (0.0, 0.0)  # lateral tip offset (dx, dy), m
    deflection_velocity: tuple[float, float] = (0.0, 0.0)
    time: float = 0.0
    payload: float = 0.0  # kg riding on the tip in addition to tip_mass


def step(state: PlantState, carriage_accel, dt: float, params: PlantParams) -> PlantState:
    """Advance the tip-deflection oscillator one semi-implicit Euler step.

    The deflection on each lateral axis obeys
        dd'' = -(k/m) d - 2*zeta*sqrt(k/m) d' - a_carriage
    with k evaluated at the current rail extension.  The symplectic update
    keeps the undriven, undamped oscillator's energy bounded.
    """
    if not 0.0 < dt <= MAX_STEP_DT:
        raise StepTooLarge(f"dt must be in (0, {MAX_STEP_DT}]")
    ax, ay = float(carriage_accel[0]), float(carriage_accel[1])
    if math.isinf(params.rail_EI):
        return replace(state, deflection=(0.0, 0.0), deflection_velocity=(0.0, 0.0),
                       time=state.time + dt)
    k = cantilever_stiffness(params.extension(state.carriage.z), params)
    m = params.tip_mass + state.payload
    omega = math.sqrt(k / m)
    if omega * dt >= 1.0:
        # far stiffer than the integrator can resolve: treat as rigid
        return replace(state, deflection=(0.0, 0.0), deflection_velocity=(0.0, 0.0),
                       time=state.time + dt)
    w2 = omega * omega
    tz = 2.0 * params.damping_ratio * omega
    dx, dy = state.deflection
    vx, vy = state.deflection_velocity
    vx += dt * (-w2 * dx - tz * vx - ax)
    dx += dt * vx
    vy += dt * (-w2 * dy - tz * vy - ay)
    dy += dt * vy
    return replace(state, deflection=(dx, dy), deflection_velocity=(vx, vy),
                   time=state.time + dt)


@dataclass
class SimTrace:
    """Uniformly sampled desired vs. simulated-actual joint series."""

    t: np.ndarray  # (n,)
    desired: np.ndarray  # (n, 6) commanded joints
    actual: np.ndarray  # (n, 6) tip position + wrist angles
    carriage: np.ndarray  # (n, 6) carriage joints (actual minus deflection)
    rate: float  # Hz
    motion_end: float  # s, command completion time

    CSV_HEADER = (
        "t,des_x,des_y,des_z,des_roll,des_pitch,des_yaw,"
        "act_x,act_y,act_z,act_roll,act_pitch,act_yaw"
    )

    def __post_init__(self) -> None:
        if len(self.t) < 2 or np.any(np.diff(self.t) <= 0.0):
            raise ValueError("trace needs >= 2 strictly increasing timestamps")

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for i in range(len(self.t)):
                row = [self.t[i], *self.desired[i], *self.actual[i]]
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path, motion_end: float | None = None) -> "SimTrace":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        t = data[:, 0]
        desired = data[:, 1:7]
        actual = data[:, 7:13]
        rate = 1.0 / float(np.median(np.diff(t)))
        if motion_end is None:
            from .evaluation import infer_motion_end

            motion_end = infer_motion_end(t, desired)
        return cls(t, desired, actual, desired.copy(), rate, motion_end)

    def position_error(self) -> np.ndarray:
        """Euclidean desired-vs-actual position error per sample, meters."""
        return np.linalg.norm(self.actual[:, :3] - self.desired[:, :3], axis=1)


def default_limits(
    vmax_linear: float = 1.0,
    amax_linear: float = 2.0,
    vmax_wrist: float = 1.0,
    amax_wrist: float = 4.0,
) -> dict[str, AxisLimits]:
    lin = AxisLimits(vmax_linear, amax_linear)
    ang = AxisLimits(vmax_wrist, amax_wrist)
    return {"x": lin, "y": lin, "z": lin, "roll": ang, "pitch": ang, "yaw": ang}


def apply_accel_cap(lims: dict[str, AxisLimits], cap: float | None) -> dict[str, AxisLimits]:
    """Clamp the linear axes' planned acceleration to the belt-slip cap."""
    if cap is None:
        return dict(lims)
    out = dict(lims)
    for axis in ("x", "y", "z"):
        lim = lims[axis]
        out[axis] = AxisLimits(lim.vmax, min(lim.amax, cap))
    return out


def _second_difference(values: np.ndarray, dt: float) -> np.ndarray:
    acc = np.zeros_like(values)
    if len(values) > 2:
        acc[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / dt**2
    return acc


def _plan_waypoint_legs(path: WaypointPath, lims: dict[str, AxisLimits]):
    """Per-leg coordinated profiles plus cumulative leg end times."""
    legs = []
    t_cursor = 0.0
    for a, b in path.legs():
        profiles = plan_coordinated(a.joints, b.joints, lims)
        duration = profiles["x"].duration
        legs.append((t_cursor, duration, profiles, a.payload))
        t_cursor += duration
    return legs, t_cursor


def _sample_waypoint_command(legs, total: float, t: np.ndarray):
    """Desired joints, velocities, accelerations, payload on the internal grid."""
    n = len(t)
    pos = np.empty((n, 6))
    vel = np.zeros((n, 6))
    acc = np.zeros((n, 6))
    payload = np.zeros(n)
    starts = np.array([leg[0] for leg in legs])
    idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(legs) - 1)
    for k, (t0, duration, profiles, mass) in enumerate(legs):
        sel = idx == k
        if not np.any(sel):
            continue
        tl = t[sel] - t0
        for j, axis in enumerate(JOINT_NAMES):
            p, v, a = profiles[axis].sample_array(tl)
            pos[sel, j] = p
            vel[sel, j] = v
            acc[sel, j] = a
        payload[sel] = mass
    return pos, vel, acc, payload


def _sample_lemniscate_command(path: LemniscatePath, lims: dict[str, AxisLimits], dt: float):
    """Trapezoidal time-warp traversal of the curve: zero speed at both ends."""
    s_total = path.arc_length()
    u_lim = AxisLimits(vmax=1.0 / path.period, amax=lims["x"].amax / s_total)
    u_profile = plan_trapezoid(1.0, u_lim)
    motion_end = u_profile.duration
    n = int(math.ceil(motion_end / dt)) + 1
    t = np.arange(n) * dt
    u, _, _ = u_profile.sample_array(t)
    pos = path.positions(u * path.period)
    full = np.zeros((n, 6))
    full[:, :3] = pos
    full[:, 3:] = np.asarray(path.wrist)
    return full, motion_end


def _integrate_deflection(acc_x, acc_y, omega2, two_zeta_omega, rigid, dt: float):
    """Sequential semi-implicit Euler over the whole run (hot loop)."""
    n = len(acc_x)
    out_x = [0.0] * n
    out_y = [0.0] * n
    ax = acc_x.tolist()
    ay = acc_y.tolist()
    w2 = omega2.tolist()
    tz = two_zeta_omega.tolist()
    rg = rigid.tolist()
    dx = vx = dy = vy = 0.0
    for i in range(1, n):
        if rg[i - 1]:
            dx = vx = dy = vy = 0.0
        else:
            w2i = w2[i - 1]
            tzi = tz[i - 1]
            vx += dt * (-w2i * dx - tzi * vx - ax[i - 1])
            dx += dt * vx
            vy += dt * (-w2i * dy - tzi * vy - ay[i - 1])
            dy += dt * vy
        out_x[i] = dx
        out_y[i] = dy
    return np.array(out_x), np.array(out_y)


def simulate(
    path: WaypointPath | LemniscatePath,
    lims: dict[str, AxisLimits],
    params: PlantParams,
    rate: float = 250.0,
    tail: float = 2.0,
    belt: BeltParams | None = None,
    desync: DesyncProfile | None = None,
    desync_rate_gain: float = 0.0,
    workspace: WorkspaceLimits | None = None,
) -> SimTrace:
    """Run the plant along a path and record a desired/actual trace.

    Waypoint paths are executed leg by leg with coordinated profiles under the
    belt-slip acceleration cap; lemniscate paths are traversed with a smooth
    time-warp.  An optional differential-belt desync perturbs the carriage's
    y/z while it is commanded (``desync`` as an explicit time profile, or
    ``desync_rate_gain`` seconds of lag proportional to the b-motor rate).
    The recorded actual tip is the carriage position plus rail deflection.
    """
    if workspace is not None and isinstance(path, WaypointPath):
        for w in path.waypoints:
            violations = validate_workspace(w.joints, workspace)
            if violations:
                axes = ", ".join(v.axis for v in violations)
                raise ValueError(f"waypoint '{w.label}' outside workspace on {axes}")

    dt = INTERNAL_DT
    lims_eff = apply_accel_cap(lims, params.accel_cap)

    if isinstance(path, WaypointPath):
        legs, motion_end = _plan_waypoint_legs(path, lims_eff)
        total = motion_end + tail
        n = int(math.ceil(total / dt)) + 1
        t = np.arange(n) * dt
        desired, vel, acc, payload = _sample_waypoint_command(legs, motion_end, t)
    else:
        desired_motion, motion_end = _sample_lemniscate_command(path, lims_eff, dt)
        total = motion_end + tail
        n = int(math.ceil(total / dt)) + 1
        t = np.arange(n) * dt
        desired = np.empty((n, 6))
        m = len(desired_motion)
        desired[:m] = desired_motion
        desired[m:] = desired_motion[-1]
        vel = np.gradient(desired, dt, axis=0)
        acc = np.zeros_like(desired)
        for j in range(6):
            acc[:, j] = _second_difference(desired[:, j], dt)
        payload = np.zeros(n)

    # differential-belt desync shifts the physical carriage on y/z
    carriage = desired.copy()
    carriage_acc_x = acc[:, 0].copy()
    carriage_acc_y = acc[:, 1].copy()
    if desync is not None or desync_rate_gain:
        bp = belt if belt is not None else BeltParams()
        lag = np.zeros(n)
        if desync is not None:
            lag += np.asarray(desync.lag(t), dtype=float)
        if desync_rate_gain:
            theta_b_rate = (vel[:, 1] - bp.differential_sign * vel[:, 2]) / bp.pulley_radius
            lag += desync_rate_gain * theta_b_rate
        dy, dz = coupling_shift(lag, bp)
        carriage[:, 1] += dy
        carriage[:, 2] += dz
        carriage_acc_y = carriage_acc_y + _second_difference(dy, dt)

    # per-step oscillator coefficients from the carriage height and payload
    if math.isinf(params.rail_EI):
        defl_x = np.zeros(n)
        defl_y = np.zeros(n)
    else:
        length = np.maximum(params.z_mount_offset + params.z_travel - carriage[:, 2],
                            MIN_EXTENSION)
        k = 3.0 * params.rail_EI / length**3
        mass = params.tip_mass + payload
        omega2 = k / mass
        omega = np.sqrt(omega2)
        rigid = omega * dt >= 1.0
        two_zeta_omega = 2.0 * params.damping_ratio * omega
        defl_x, defl_y = _integrate_deflection(
            carriage_acc_x, carriage_acc_y, omega2, two_zeta_omega, rigid, dt
        )

    actual = carriage.copy()
    actual[:, 0] += defl_x
    actual[:, 1] += defl_y

    decim = max(1, round(1.0 / (rate * dt)))
    sl = slice(None, None, decim)
    return SimTrace(
        t=t[sl].copy(),
        desired=desired[sl].copy(),
        actual=actual[sl].copy(),
        carriage=carriage[sl].copy(),
        rate=1.0 / (decim * dt),
        motion_end=motion_end,
    )


def settle_time(trace: SimTrace, tol: float) -> float:
    """First time at or after command completion from which the position error
    stays below tol to the end of the trace; inf if it never does."""
    if trace.t[-1] < trace.motion_end:
        raise ValueError("trace ends before the motion command completes")
    err = trace.position_error()
    after = trace.t >= trace.motion_end
    idx = np.nonzero(after)[0]
    bad = idx[err[idx] >= tol]
    if len(bad) == 0:
        return float(trace.motion_end)
    last_bad = bad[-1]
    if last_bad == idx[-1]:
        return math.inf
    return float(trace.t[last_bad + 1])
