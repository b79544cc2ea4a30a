"""Motor-shaft to joint-space mapping, including the Y/Z differential belt pair.

The two differential motors drive Y and Z jointly: co-rotation moves Y,
counter-rotation moves Z (CoreXY-style sum/difference of belt displacements).
Imperfect synchronization of the pair shows up as transient Y/Z coupling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .kinematics import JointState


@dataclass(frozen=True)
class BeltParams:
    pulley_radius: float = 0.02  # m
    x_gain: float = 0.02  # m of X travel per radian of shaft rotation
    differential_sign: int = 1
    wrist_gear_ratio: float = 1.0

    def __post_init__(self) -> None:
        if self.pulley_radius <= 0.0:
            raise ValueError("pulley_radius must be > 0")
        if self.x_gain <= 0.0:
            raise ValueError("x_gain must be > 0")
        if self.differential_sign not in (1, -1):
            raise ValueError("differential_sign must be +1 or -1")
        if self.wrist_gear_ratio <= 0.0:
            raise ValueError("wrist_gear_ratio must be > 0")

    def differential_matrix(self) -> np.ndarray:
        """Matrix sending (y, z) to (theta_a, theta_b); determinant -2s/r**2 != 0."""
        r, s = self.pulley_radius, self.differential_sign
        return np.array([[1.0, s], [1.0, -s]]) / r


@dataclass(frozen=True)
class MotorState:
    """Motor shaft angles in radians; multi-turn, so no range limit."""

    theta_x: float = 0.0
    theta_a: float = 0.0
    theta_b: float = 0.0
    theta_roll: float = 0.0
    theta_pitch: float = 0.0
    theta_yaw: float = 0.0

    def __post_init__(self) -> None:
        for name in ("theta_x", "theta_a", "theta_b", "theta_roll", "theta_pitch", "theta_yaw"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class DesyncProfile:
    """Lag of the differential b-motor relative to its command, as a function of time.

    ``lag`` maps seconds to a radian offset applied to theta_b; it must vanish
    at t = 0 and accept numpy arrays.
    """

    lag: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        if abs(float(np.asarray(self.lag(np.array(0.0))))) > 1e-15:
            raise ValueError("lag(0) must be 0")

    @classmethod
    def zero(cls) -> "DesyncProfile":
        return cls(lambda t: np.zeros_like(np.asarray(t, dtype=float)))

    @classmethod
    def constant_during(cls, delta: float, t_start: float, t_end: float) -> "DesyncProfile":
        """Constant lag while t_start < t < t_end, zero outside."""
        if t_start <= 0.0:
            raise ValueError("t_start must be > 0 so lag(0) = 0")

        def lag(t):
            t = np.asarray(t, dtype=float)
            return np.where((t > t_start) & (t < t_end), delta, 0.0)

        return cls(lag)


def joints_to_motors(q: JointState, bp: BeltParams) -> MotorState:
    """Joint space -> motor shaft space."""
    r, s, g = bp.pulley_radius, bp.differential_sign, bp.wrist_gear_ratio
    return MotorState(
        theta_x=q.x / bp.x_gain,
        theta_a=(q.y + s * q.z) / r,
        theta_b=(q.y - s * q.z) / r,
        theta_roll=q.roll * g,
        theta_pitch=q.pitch * g,
        theta_yaw=q.yaw * g,
    )


def motors_to_joints(m: MotorState, bp: BeltParams) -> JointState:
    """Motor shaft space -> joint space; exact inverse of joints_to_motors."""
    r, s, g = bp.pulley_radius, bp.differential_sign, bp.wrist_gear_ratio
    return JointState(
        x=m.theta_x * bp.x_gain,
        y=r * (m.theta_a + m.theta_b) / 2.0,
        z=s * r * (m.theta_a - m.theta_b) / 2.0,
        roll=m.theta_roll / g,
        pitch=m.theta_pitch / g,
        yaw=m.theta_yaw / g,
    )


def coupling_shift(lag: np.ndarray, bp: BeltParams) -> tuple[np.ndarray, np.ndarray]:
    """Joint-space (dy, dz) displacement produced by a theta_b lag.

    Linearity of the differential mapping makes the perturbation closed form:
    dy = r*lag/2, dz = -s*r*lag/2.  Desync never touches x or the wrist.
    """
    lag = np.asarray(lag, dtype=float)
    r, s = bp.pulley_radius, bp.differential_sign
    return r * lag / 2.0, -s * r * lag / 2.0


def coupling_error(
    times: Sequence[float],
    commanded: Sequence[JointState],
    desync: DesyncProfile,
    bp: BeltParams,
) -> list[JointState]:
    """Actual joint series when the b motor lags its command by desync.lag(t).

    Maps commands through joints_to_motors, perturbs theta_b, and maps back.
    A pure-Y command with a transient lag shows a transient z excursion that
    vanishes once the lag returns to zero.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) != len(commanded):
        raise ValueError("times and commanded must be parallel 1-d series")
    if np.any(np.diff(t) < 0.0):
        raise ValueError("times must be non-decreasing")
    dy, dz = coupling_shift(desync.lag(t), bp)
    return [
        q.replace(y=q.y + float(dy[i]), z=q.z + float(dz[i]))
        for i, q in enumerate(commanded)
    ]
