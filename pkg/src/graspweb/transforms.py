"""Rigid-body transforms: unit quaternions, poses, rotation encodings.

Conventions used throughout the package:
  quaternions : (w, x, y, z), unit norm
  poses       : translation (3,) in meters + rotation quaternion, mapping
                local coordinates into the parent (usually world) frame
  rotations   : right-handed, radians
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_UNIT_TOL = 1e-9


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def quat_multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([w, -x, -y, -z])


def _cross3(a, b) -> np.ndarray:
    """Cross product on the last axis; avoids np.cross overhead for 3-vectors."""
    out = np.empty(np.broadcast(a, b).shape)
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector(s) v by unit quaternion q.

    Accepts a single (3,) vector or an (N, 3) array.
    """
    v = np.asarray(v, dtype=float)
    w = q[0]
    u = np.asarray(q[1:], dtype=float)
    # v' = v + 2w (u x v) + 2 u x (u x v)
    uv = _cross3(u, v)
    return v + 2.0 * w * uv + 2.0 * _cross3(u, uv)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        if abs(angle) > 1e-12:
            raise ValueError("rotation axis must be nonzero for nonzero angle")
        return quat_identity()
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis / n])


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R) -> np.ndarray:
    """Shepperd's method; returns (w, x, y, z) with w >= 0."""
    R = np.asarray(R, dtype=float)
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(R[i, i] - R[j, j] - R[k, k] + 1.0) * 2.0
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def rotation_6d(R) -> np.ndarray:
    """First two columns of a rotation matrix, flattened (continuity-friendly
    orientation encoding for learned policies)."""
    R = np.asarray(R, dtype=float)
    return np.concatenate([R[:, 0], R[:, 1]])


def rotation_about_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_about_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_about_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@dataclass
class Pose:
    """Rigid transform mapping local points into the parent frame."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        q = np.asarray(self.rotation, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > _UNIT_TOL:
            raise ValueError(f"quaternion norm {n} deviates from 1 beyond {_UNIT_TOL}")
        self.rotation = q / n

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_axis_angle(cls, translation, axis, angle: float) -> "Pose":
        return cls(np.asarray(translation, dtype=float), quat_from_axis_angle(axis, angle))

    @classmethod
    def from_matrix(cls, translation, R) -> "Pose":
        return cls(np.asarray(translation, dtype=float), matrix_to_quat(R))

    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def transform_point(self, p) -> np.ndarray:
        return quat_rotate(self.rotation, p) + self.translation

    def transform_direction(self, d) -> np.ndarray:
        return quat_rotate(self.rotation, d)

    def inverse_point(self, p) -> np.ndarray:
        return quat_rotate(quat_conjugate(self.rotation), np.asarray(p, dtype=float) - self.translation)

    def inverse_direction(self, d) -> np.ndarray:
        return quat_rotate(quat_conjugate(self.rotation), d)

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply `other` first, then `self`."""
        return Pose(
            self.transform_point(other.translation),
            quat_normalize(quat_multiply(self.rotation, other.rotation)),
        )

    def inverse(self) -> "Pose":
        qinv = quat_conjugate(self.rotation)
        return Pose(quat_rotate(qinv, -self.translation), qinv)

    def to_dict(self) -> dict:
        return {"translation": self.translation.tolist(), "rotation": self.rotation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(np.array(d["translation"]), np.array(d["rotation"]))


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    while n < 1e-9:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
    return v / n
