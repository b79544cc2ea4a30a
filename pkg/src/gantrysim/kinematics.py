"""Closed-form kinematics for a 3-prismatic-axis gantry with a spherical wrist.

The three linear joints map one-to-one onto task-space position, so forward
kinematics is trivially exact and the inverse is a closed-form Euler-angle
extraction.  The wrist uses the intrinsic Z(yaw)-Y(pitch)-X(roll) convention,
which puts gimbal lock at pitch = +/- pi/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * math.pi

JOINT_NAMES = ("x", "y", "z", "roll", "pitch", "yaw")
LINEAR_AXES = ("x", "y", "z")
WRIST_AXES = ("roll", "pitch", "yaw")


def normalize_angle(angle: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    r = math.fmod(angle, TWO_PI)
    if r > math.pi:
        r -= TWO_PI
    elif r <= -math.pi:
        r += TWO_PI
    return r


def rot_x(a: float) -> np.ndarray:
    ca, sa = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])


def rot_y(a: float) -> np.ndarray:
    ca, sa = math.cos(a), math.sin(a)
    return np.array([[ca, 0.0, sa], [0.0, 1.0, 0.0], [-sa, 0.0, ca]])


def rot_z(a: float) -> np.ndarray:
    ca, sa = math.cos(a), math.sin(a)
    return np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])


def rotation_to_quaternion(r: np.ndarray) -> np.ndarray:
    """Convert a rotation matrix to a unit quaternion (w, x, y, z), w >= 0."""
    t = np.trace(r)
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(r[i, i] - r[j, j] - r[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_log(r: np.ndarray) -> np.ndarray:
    """Axis-angle vector (rotation vector) of a rotation matrix.

    Accurate for small rotations, which is what finite-difference checks feed
    in; the antipodal case (angle near pi) falls back to the diagonal method.
    """
    s = 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    c = 0.5 * (np.trace(r) - 1.0)
    sn = np.linalg.norm(s)
    angle = math.atan2(sn, c)
    if sn < 1e-12:
        if c > 0.0:
            return s  # first-order: log(R) ~ vee(R - R^T)/2
        # angle ~ pi: axis from the dominant diagonal entry
        d = np.sqrt(np.maximum(np.diag(r) - c, 0.0) / (1.0 - c))
        axis = d / np.linalg.norm(d)
        axis[0] = math.copysign(axis[0], r[2, 1] - r[1, 2]) if axis[0] else axis[0]
        return angle * axis
    return angle * s / sn


@dataclass(frozen=True)
class JointState:
    """Configuration-space point: meters for x/y/z, radians for the wrist.

    Wrist angles are normalized to (-pi, pi] on construction so equality
    comparisons are well defined.
    """

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self) -> None:
        for name in WRIST_AXES:
            object.__setattr__(self, name, normalize_angle(float(getattr(self, name))))
        for name in LINEAR_AXES:
            object.__setattr__(self, name, float(getattr(self, name)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.roll, self.pitch, self.yaw])

    @classmethod
    def from_array(cls, values) -> "JointState":
        x, y, z, roll, pitch, yaw = (float(v) for v in values)
        return cls(x, y, z, roll, pitch, yaw)

    def replace(self, **kwargs) -> "JointState":
        return replace(self, **kwargs)

    def to_ros_dict(self, velocity=None) -> dict:
        """Serialize in the ROS JointState message shape."""
        msg = {"name": list(JOINT_NAMES), "position": [float(v) for v in self.as_array()]}
        if velocity is not None:
            msg["velocity"] = [float(v) for v in velocity]
        return msg

    @classmethod
    def from_ros_dict(cls, msg: dict) -> "JointState":
        by_name = dict(zip(msg["name"], msg["position"]))
        return cls(**{name: by_name[name] for name in JOINT_NAMES})


@dataclass(frozen=True)
class Pose:
    """Task-space pose: position in meters plus a proper rotation matrix."""

    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.position, dtype=float).reshape(3).copy()
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3).copy()
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9 or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must be orthonormal with determinant +1")
        p.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "rotation", r)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.eye(3))

    @property
    def quaternion(self) -> np.ndarray:
        return rotation_to_quaternion(self.rotation)

    def to_json_dict(self) -> dict:
        return {
            "p": [float(v) for v in self.position],
            "q": [float(v) for v in self.quaternion],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Pose":
        return cls(np.asarray(obj["p"], dtype=float), quaternion_to_rotation(np.asarray(obj["q"])))


@dataclass(frozen=True)
class WorkspaceLimits:
    """Reachable box plus rated speeds and payload; defaults are the design specs."""

    x: tuple[float, float] = (0.0, 1.2)
    y: tuple[float, float] = (0.0, 1.2)
    z: tuple[float, float] = (0.0, 1.0)
    vmax_linear: float = 1.0
    vmax_angular: float = 1.0
    payload: float = 2.0

    def bounds(self, axis: str) -> tuple[float, float]:
        return getattr(self, axis)


@dataclass(frozen=True)
class Violation:
    axis: str
    value: float
    lo: float
    hi: float

    @property
    def excess(self) -> float:
        if self.value < self.lo:
            return self.lo - self.value
        return self.value - self.hi


@dataclass(frozen=True)
class IkResult:
    joints: JointState
    gimbal_locked: bool = False


def forward_kinematics(q: JointState) -> Pose:
    """Map joints to the end-effector pose.

    Translation is the identity (the configuration space is the task space);
    orientation is Rz(yaw) @ Ry(pitch) @ Rx(roll).
    """
    r = rot_z(q.yaw) @ rot_y(q.pitch) @ rot_x(q.roll)
    return Pose(np.array([q.x, q.y, q.z]), r)


def inverse_kinematics(p: Pose) -> IkResult:
    """Recover joints from a pose via ZYX Euler extraction.

    At gimbal lock (|pitch| = pi/2) yaw and roll share an axis; the canonical
    solution sets yaw = 0, lets roll absorb the free angle, and flags the
    degeneracy instead of failing.
    """
    r = p.rotation
    sp = -r[2, 0]
    sp = min(1.0, max(-1.0, float(sp)))
    x, y, z = (float(v) for v in p.position)
    if abs(abs(sp) - 1.0) <= 1e-9:
        pitch = math.copysign(math.pi / 2.0, sp)
        if sp > 0.0:
            roll = math.atan2(r[0, 1], r[1, 1])
        else:
            roll = math.atan2(-r[0, 1], r[1, 1])
        return IkResult(JointState(x, y, z, roll, pitch, 0.0), gimbal_locked=True)
    pitch = math.asin(sp)
    yaw = math.atan2(r[1, 0], r[0, 0])
    roll = math.atan2(r[2, 1], r[2, 2])
    return IkResult(JointState(x, y, z, roll, pitch, yaw))


def wrist_rate_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Map (roll, pitch, yaw) rates to world angular velocity for ZYX Euler.

    Columns correspond to roll, pitch, yaw rates; the determinant is
    cos(pitch), vanishing exactly at gimbal lock.
    """
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, -sy, 0.0],
            [sy * cp, cy, 0.0],
            [-sp, 0.0, 1.0],
        ]
    )


def jacobian(q: JointState) -> np.ndarray:
    """6x6 Jacobian: rows (linear velocity, angular velocity), columns joint rates.

    The translational block is exactly the identity for every configuration;
    the angular block depends only on the wrist angles.
    """
    j = np.zeros((6, 6))
    j[:3, :3] = np.eye(3)
    j[3:, 3:] = wrist_rate_matrix(q.roll, q.pitch, q.yaw)
    return j


def validate_workspace(q: JointState, lim: WorkspaceLimits) -> list[Violation]:
    """Return a violation per linear axis outside its bound (empty list = ok)."""
    out = []
    for axis in LINEAR_AXES:
        lo, hi = lim.bounds(axis)
        value = getattr(q, axis)
        if value < lo or value > hi:
            out.append(Violation(axis, value, lo, hi))
    return out
