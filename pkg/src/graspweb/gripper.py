"""Simplified two-virtual-finger gripper.

Kinematic layout (all in the wrist frame; the hand hangs "down" the local
-z axis toward the object):

  wrist local +z : points back along the approach direction (away from the
                   object); the wrist may slide along this axis only
  wrist local +y : finger-straddle axis; the bind-finger chain roots at
                   +palm_width/2, the thumb at -palm_width/2 (plus a small
                   lateral x offset modelling hand asymmetry)
  palm pad       : fixed point below the wrist origin, pressing along -z

The bind chain (index+middle+ring bent together) has 3 curl joints about
the local -x axis so positive angles curl toward the centerline.  The thumb
has an abduction joint about local z followed by 3 curl joints about +x,
again with positive = toward the centerline.  Fingertip "pads" face the
centerline at rest; the pad normal is the candidate contact force
direction, and the pad surface point (tip center + pad radius along the
pad normal) is the contact position handed to the reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transforms import Pose, quat_from_axis_angle, quat_multiply, quat_rotate

BIND = "bind"
THUMB = "thumb"
PALM = "palm"


class JointLimitViolation(Exception):
    pass


@dataclass(frozen=True)
class JointSpec:
    axis: tuple[float, float, float]
    low: float
    high: float
    link_length: float  # meters, along local -z after the joint

    def __post_init__(self):
        if self.link_length <= 0:
            raise ValueError("link length must be positive")
        if not self.low < self.high:
            raise ValueError("joint limits must satisfy low < high")


@dataclass(frozen=True)
class GripperModel:
    bind_joints: tuple[JointSpec, ...]
    thumb_joints: tuple[JointSpec, ...]
    palm_width: float = 0.04
    palm_drop: float = 0.025        # palm pad sits this far below the wrist origin
    fingertip_radius: float = 0.008
    thumb_root_offset: float = 0.004  # lateral (x) offset of the thumb base
    wrist_travel: float = 0.20
    joint_velocity_limit: float = 2.0   # rad/s
    wrist_velocity_limit: float = 0.25  # m/s
    # Episode start configuration: an open pre-grasp wide enough to straddle
    # the largest randomized object (pads vertical, aperture ~12 cm).
    rest_angles: tuple[float, ...] = (-0.73, 0.0, 0.73, 0.0, -1.06, 0.0, 1.06)

    def __post_init__(self):
        if len(self.bind_joints) != 3 or len(self.thumb_joints) != 4:
            raise ValueError("expected 3 bind joints and 4 thumb joints")
        if self.fingertip_radius <= 0 or self.palm_width <= 0:
            raise ValueError("palm_width and fingertip_radius must be positive")
        if len(self.rest_angles) != 7:
            raise ValueError("rest_angles must have 7 entries")

    @classmethod
    def default(cls, thumb_root_offset: float = 0.004) -> "GripperModel":
        curl = dict(low=-1.75, high=1.75)
        bind = tuple(JointSpec(axis=(-1.0, 0.0, 0.0), link_length=0.030, **curl) for _ in range(3))
        thumb = (JointSpec(axis=(0.0, 0.0, 1.0), low=-1.3, high=1.3, link_length=0.023),) + tuple(
            JointSpec(axis=(1.0, 0.0, 0.0), link_length=0.023, **curl) for _ in range(3)
        )
        return cls(bind_joints=bind, thumb_joints=thumb, thumb_root_offset=thumb_root_offset)

    def rest_state(self) -> "GripperState":
        return GripperState(0.0, np.array(self.rest_angles))

    @property
    def num_joints(self) -> int:
        return len(self.bind_joints) + len(self.thumb_joints)

    @property
    def action_dim(self) -> int:
        return self.num_joints + 1  # + wrist slide

    def joint_limits(self) -> np.ndarray:
        specs = self.bind_joints + self.thumb_joints
        return np.array([[s.low, s.high] for s in specs])

    def bind_root(self) -> np.ndarray:
        return np.array([0.0, self.palm_width / 2.0, 0.0])

    def thumb_root(self) -> np.ndarray:
        return np.array([self.thumb_root_offset, -self.palm_width / 2.0, 0.0])

    def to_dict(self) -> dict:
        def enc(js: JointSpec) -> dict:
            return {
                "axis": list(js.axis),
                "low": js.low,
                "high": js.high,
                "link_length": js.link_length,
            }

        return {
            "bind_joints": [enc(j) for j in self.bind_joints],
            "thumb_joints": [enc(j) for j in self.thumb_joints],
            "palm_width": self.palm_width,
            "palm_drop": self.palm_drop,
            "fingertip_radius": self.fingertip_radius,
            "thumb_root_offset": self.thumb_root_offset,
            "wrist_travel": self.wrist_travel,
            "joint_velocity_limit": self.joint_velocity_limit,
            "wrist_velocity_limit": self.wrist_velocity_limit,
            "rest_angles": list(self.rest_angles),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GripperModel":
        def dec(j: dict) -> JointSpec:
            return JointSpec(tuple(j["axis"]), float(j["low"]), float(j["high"]), float(j["link_length"]))

        return cls(
            bind_joints=tuple(dec(j) for j in d["bind_joints"]),
            thumb_joints=tuple(dec(j) for j in d["thumb_joints"]),
            palm_width=float(d["palm_width"]),
            palm_drop=float(d["palm_drop"]),
            fingertip_radius=float(d["fingertip_radius"]),
            thumb_root_offset=float(d["thumb_root_offset"]),
            wrist_travel=float(d["wrist_travel"]),
            joint_velocity_limit=float(d["joint_velocity_limit"]),
            wrist_velocity_limit=float(d["wrist_velocity_limit"]),
            rest_angles=tuple(float(x) for x in d.get("rest_angles", (-0.73, 0.0, 0.73, 0.0, -1.06, 0.0, 1.06))),
        )


@dataclass
class GripperState:
    """Wrist slide along the approach axis + 7 joint angles (3 bind, 4 thumb)."""

    wrist_offset: float = 0.0
    joint_angles: np.ndarray = field(default_factory=lambda: np.zeros(7))

    def __post_init__(self):
        self.joint_angles = np.asarray(self.joint_angles, dtype=float).reshape(7)

    def copy(self) -> "GripperState":
        return GripperState(self.wrist_offset, self.joint_angles.copy())

    def validate(self, model: GripperModel) -> None:
        limits = model.joint_limits()
        if np.any(self.joint_angles < limits[:, 0] - 1e-12) or np.any(
            self.joint_angles > limits[:, 1] + 1e-12
        ):
            raise JointLimitViolation(f"joint angles {self.joint_angles} outside limits")
        if abs(self.wrist_offset) > model.wrist_travel + 1e-12:
            raise JointLimitViolation(f"wrist offset {self.wrist_offset} outside travel")


@dataclass
class BodyContact:
    """Kinematic state of one contact body (finger pad or palm pad)."""

    name: str
    position: np.ndarray        # pad surface point, world frame
    center: np.ndarray          # pad sphere center, world frame
    force_direction: np.ndarray  # unit pad normal, world frame
    in_contact: bool = False


@dataclass
class FingerContactState:
    bodies: dict[str, BodyContact]

    def __getitem__(self, name: str) -> BodyContact:
        return self.bodies[name]

    def __iter__(self):
        return iter(self.bodies.values())


def _chain(root_world, base_rotation, joints, angles, pad_local):
    """Serial chain: rotate about each joint axis, then advance one link along
    the rotated local -z.  Returns (tip center, world pad normal)."""
    q = base_rotation
    p = np.asarray(root_world, dtype=float).copy()
    for spec, angle in zip(joints, angles):
        q = quat_multiply(q, quat_from_axis_angle(np.array(spec.axis), float(angle)))
        p = p + quat_rotate(q, np.array([0.0, 0.0, -spec.link_length]))
    return p, quat_rotate(q, np.asarray(pad_local, dtype=float))


def forward_kinematics(
    model: GripperModel,
    wrist_pose: Pose,
    state: GripperState,
) -> FingerContactState:
    """Pad positions and candidate force directions for both fingers and the
    palm.  `wrist_pose` already contains the approach placement including the
    wrist slide; contact flags are left unset."""
    state.validate(model)
    rho = model.fingertip_radius

    bind_center, bind_pad_dir = _chain(
        wrist_pose.transform_point(model.bind_root()),
        wrist_pose.rotation,
        model.bind_joints,
        state.joint_angles[:3],
        [0.0, -1.0, 0.0],
    )
    thumb_center, thumb_pad_dir = _chain(
        wrist_pose.transform_point(model.thumb_root()),
        wrist_pose.rotation,
        model.thumb_joints,
        state.joint_angles[3:],
        [0.0, 1.0, 0.0],
    )

    palm_center = wrist_pose.transform_point(np.array([0.0, 0.0, -model.palm_drop]))
    palm_dir = wrist_pose.transform_direction(np.array([0.0, 0.0, -1.0]))

    bodies = {
        BIND: BodyContact(BIND, bind_center + rho * bind_pad_dir, bind_center, bind_pad_dir),
        THUMB: BodyContact(THUMB, thumb_center + rho * thumb_pad_dir, thumb_center, thumb_pad_dir),
        PALM: BodyContact(PALM, palm_center + rho * palm_dir, palm_center, palm_dir),
    }
    return FingerContactState(bodies)


def apply_action(
    model: GripperModel, state: GripperState, action: np.ndarray, dt: float
) -> GripperState:
    """Euler-integrate velocity commands, clamping to velocity and position
    limits.  `action` is 8 normalized commands in [-1, 1]: 7 joints + wrist."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    a = np.clip(np.asarray(action, dtype=float).reshape(model.action_dim), -1.0, 1.0)
    limits = model.joint_limits()
    angles = state.joint_angles + a[:-1] * model.joint_velocity_limit * dt
    angles = np.clip(angles, limits[:, 0], limits[:, 1])
    wrist = state.wrist_offset + a[-1] * model.wrist_velocity_limit * dt
    wrist = float(np.clip(wrist, -model.wrist_travel, model.wrist_travel))
    return GripperState(wrist, angles)
