"""Contact webs: desired contact points + force directions defining a grasp.

A web is an ordered list of (c_i, n_i) pairs — contact location on the
object surface and desired contact force direction, with n_i pointing into
the object — plus a grasp-type tag and its own reference frame.  The frame
is the coordinate system every policy observation is expressed in.

Grasp types and their contact counts:

  ACTIVE_FORCE  (2): antipodal fingertip contacts on the lateral faces,
                     upper region of the object
  PASSIVE_FORCE (3): the two lateral contacts plus a palm contact pressing
                     down on the top face
  PASSIVE_FORM  (1): a single hook contact on the far side of the object,
                     force direction pointing back toward the approach side

Frame convention (artifact-defined): origin at the contact centroid;
z axis from the mean of -n_i (the "out of the object, toward the hand"
direction), except for the hook grasp where the mean points away from the
hand and +n is used instead; y axis along the finger-straddle direction
(vertical for the hook); x = y cross z.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .geometry import SURFACE_BAND, SuperquadricObject, _local_inside_outside
from .transforms import Pose, quat_from_axis_angle, quat_multiply

MAX_NOISE_TRANSLATION = 0.005            # meters
MAX_NOISE_ROTATION = np.deg2rad(1.5)     # radians

# Lateral contacts for the force grasps sit at this fraction of the object
# height, keeping them clear of whatever supports the object.
LATERAL_CONTACT_HEIGHT_FRACTION = 0.75
# The hook contact sits below the mid-height so a finger arriving over the
# top can curl down behind the object.
HOOK_CONTACT_HEIGHT_FRACTION = 0.25


class GraspType(enum.Enum):
    ACTIVE_FORCE = "active_force"
    PASSIVE_FORCE = "passive_force"
    PASSIVE_FORM = "passive_form"


CONTACT_COUNT = {
    GraspType.ACTIVE_FORCE: 2,
    GraspType.PASSIVE_FORCE: 3,
    GraspType.PASSIVE_FORM: 1,
}


class PlacementFailure(Exception):
    """Surface projection failed while placing a web on an object."""


class NoiseBoundsExceeded(Exception):
    pass


@dataclass(frozen=True)
class ApproachDirection:
    """Spherical direction toward the hand, in the web frame."""

    zenith: float   # radians, [0, pi/2]
    azimuth: float  # radians, (-pi, pi]

    def __post_init__(self):
        if not 0.0 <= self.zenith <= np.pi / 2.0 + 1e-12:
            raise ValueError(f"zenith {self.zenith} outside [0, pi/2]")
        if not -np.pi < self.azimuth <= np.pi + 1e-12:
            raise ValueError(f"azimuth {self.azimuth} outside (-pi, pi]")

    def local_vector(self) -> np.ndarray:
        sz, cz = np.sin(self.zenith), np.cos(self.zenith)
        return np.array([sz * np.cos(self.azimuth), sz * np.sin(self.azimuth), cz])

    def to_dict(self) -> dict:
        return {"zenith": self.zenith, "azimuth": self.azimuth}

    @classmethod
    def from_dict(cls, d: dict) -> "ApproachDirection":
        return cls(float(d["zenith"]), float(d["azimuth"]))


@dataclass(frozen=True)
class WebNoise:
    """Rigid perturbation emulating recognition error, applied in the
    web-local frame: translation |t| <= 5 mm, rotation angle <= 1.5 deg."""

    translation: np.ndarray
    rotation_axis: np.ndarray
    rotation_angle: float

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        ax = np.asarray(self.rotation_axis, dtype=float).reshape(3)
        if np.linalg.norm(t) > MAX_NOISE_TRANSLATION + 1e-12:
            raise NoiseBoundsExceeded(f"|translation| {np.linalg.norm(t)} > {MAX_NOISE_TRANSLATION}")
        if abs(self.rotation_angle) > MAX_NOISE_ROTATION + 1e-12:
            raise NoiseBoundsExceeded(f"rotation {self.rotation_angle} > {MAX_NOISE_ROTATION}")
        n = np.linalg.norm(ax)
        if n < 1e-12:
            if abs(self.rotation_angle) > 1e-15:
                raise ValueError("rotation axis must be nonzero for nonzero angle")
            ax = np.array([0.0, 0.0, 1.0])
            n = 1.0
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation_axis", ax / n)

    @classmethod
    def zero(cls) -> "WebNoise":
        return cls(np.zeros(3), np.array([0.0, 0.0, 1.0]), 0.0)

    @classmethod
    def sample(cls, rng: np.random.Generator) -> "WebNoise":
        from .transforms import random_unit_vector

        direction = random_unit_vector(rng)
        magnitude = rng.uniform(0.0, MAX_NOISE_TRANSLATION)
        axis = random_unit_vector(rng)
        angle = rng.uniform(0.0, MAX_NOISE_ROTATION)
        return cls(direction * magnitude, axis, angle)

    def to_dict(self) -> dict:
        return {
            "translation": self.translation.tolist(),
            "rotation_axis": self.rotation_axis.tolist(),
            "rotation_angle": self.rotation_angle,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WebNoise":
        return cls(np.array(d["translation"]), np.array(d["rotation_axis"]), float(d["rotation_angle"]))


@dataclass
class ContactWeb:
    contacts: list[tuple[np.ndarray, np.ndarray]]  # (c_i world, unit n_i world)
    grasp_type: GraspType
    frame: Pose

    def __post_init__(self):
        cleaned = []
        for c, n in self.contacts:
            c = np.asarray(c, dtype=float).reshape(3)
            n = np.asarray(n, dtype=float).reshape(3)
            nn = np.linalg.norm(n)
            if abs(nn - 1.0) > 1e-9:
                raise ValueError("contact force direction must be unit length")
            cleaned.append((c, n / nn))
        expected = CONTACT_COUNT[self.grasp_type]
        if len(cleaned) != expected:
            raise ValueError(
                f"{self.grasp_type.value} web needs {expected} contacts, got {len(cleaned)}"
            )
        self.contacts = cleaned

    @property
    def center(self) -> np.ndarray:
        return self.frame.translation

    def to_web_point(self, world_point) -> np.ndarray:
        return self.frame.inverse_point(world_point)

    def to_web_direction(self, world_direction) -> np.ndarray:
        return self.frame.inverse_direction(world_direction)

    def from_web_point(self, local_point) -> np.ndarray:
        return self.frame.transform_point(local_point)

    def approach_vector(self, approach: ApproachDirection) -> np.ndarray:
        """World-frame unit vector from the web center toward the hand."""
        return self.frame.transform_direction(approach.local_vector())

    def to_dict(self) -> dict:
        return {
            "contacts": [[c.tolist(), n.tolist()] for c, n in self.contacts],
            "grasp_type": self.grasp_type.value,
            "frame": self.frame.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContactWeb":
        return cls(
            contacts=[(np.array(c), np.array(n)) for c, n in d["contacts"]],
            grasp_type=GraspType(d["grasp_type"]),
            frame=Pose.from_dict(d["frame"]),
        )


# ----------------------------------------------------------------------
# Placement
# ----------------------------------------------------------------------

def _bisect_surface(obj: SuperquadricObject, local_axis: np.ndarray, local_base: np.ndarray,
                    iterations: int = 60) -> np.ndarray:
    """Find s > 0 with F(local_base + s*axis) = 1 by bisection.

    F is monotone along rays from the center, so a bracket [0, s_hi] with
    F(s_hi) > 1 guarantees convergence.
    """
    params = obj.params
    s_hi = 2.5 * float(np.max(params.half_extents))
    f_hi = float(_local_inside_outside(params, local_base + s_hi * local_axis))
    if f_hi <= 1.0:
        raise PlacementFailure("could not bracket the object surface")
    lo, hi = 0.0, s_hi
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if float(_local_inside_outside(params, local_base + mid * local_axis)) < 1.0:
            lo = mid
        else:
            hi = mid
    return local_base + 0.5 * (lo + hi) * local_axis


def _orthonormal_frame(origin: np.ndarray, z_axis: np.ndarray, y_hint: np.ndarray) -> Pose:
    z = z_axis / np.linalg.norm(z_axis)
    y = y_hint - np.dot(y_hint, z) * z
    ny = np.linalg.norm(y)
    if ny < 1e-9:
        raise PlacementFailure("degenerate web frame axes")
    y = y / ny
    x = np.cross(y, z)
    return Pose.from_matrix(origin, np.column_stack([x, y, z]))


def place_web(obj: SuperquadricObject, grasp_type: GraspType) -> ContactWeb:
    """Place the canonical contact web of `grasp_type` on the object.

    Contacts are found in the object's local frame by bisecting F = 1 along
    the relevant axes, then mapped to world.  Force directions are the
    inward surface normals at the contacts.
    """
    params = obj.params
    pose = obj.pose
    a3 = params.a3

    def world_contact(local_point) -> tuple[np.ndarray, np.ndarray]:
        c = pose.transform_point(local_point)
        n = -obj.surface_normal(c)  # inward
        return c, n

    if grasp_type in (GraspType.ACTIVE_FORCE, GraspType.PASSIVE_FORCE):
        z_c = a3 * (2.0 * LATERAL_CONTACT_HEIGHT_FRACTION - 1.0)
        base = np.array([0.0, 0.0, z_c])
        right = _bisect_surface(obj, np.array([0.0, 1.0, 0.0]), base)
        left = _bisect_surface(obj, np.array([0.0, -1.0, 0.0]), base)
        contacts = [world_contact(right), world_contact(left)]
        if grasp_type is GraspType.PASSIVE_FORCE:
            top = _bisect_surface(obj, np.array([0.0, 0.0, 1.0]), np.zeros(3))
            contacts.append(world_contact(top))
        origin = np.mean([c for c, _ in contacts], axis=0)
        mean_out = -np.mean([n for _, n in contacts], axis=0)
        if np.linalg.norm(mean_out) < 1e-6:
            z_axis = pose.transform_direction(np.array([0.0, 0.0, 1.0]))
        else:
            z_axis = mean_out
        y_hint = contacts[0][0] - contacts[1][0]  # straddle axis, right minus left
        frame = _orthonormal_frame(origin, z_axis, y_hint)
        return ContactWeb(contacts, grasp_type, frame)

    # Hook: single contact on the -x face (the far side relative to the
    # approach), force direction back toward the approach side.
    z_c = a3 * (2.0 * HOOK_CONTACT_HEIGHT_FRACTION - 1.0)
    base = np.array([0.0, 0.0, z_c])
    hook = _bisect_surface(obj, np.array([-1.0, 0.0, 0.0]), base)
    c, n = world_contact(hook)
    # mean(-n) points away from the hand here; the approach side is +n.
    z_axis = n
    y_hint = pose.transform_direction(np.array([0.0, 0.0, 1.0]))
    frame = _orthonormal_frame(c, z_axis, y_hint)
    return ContactWeb([(c, n)], grasp_type, frame)


def perturb_web(web: ContactWeb, noise: WebNoise) -> ContactWeb:
    """Rigidly perturb a web by `noise` to obtain the "recognized" web.

    The perturbation is expressed in the web's own frame (rotation about the
    web origin, translation along the web axes) so that a rigid transform of
    the whole scene commutes with the noise — the basis of the
    observation-frame invariance guarantees.
    """
    # Re-validate bounds (constructed WebNoise already enforces them).
    if np.linalg.norm(noise.translation) > MAX_NOISE_TRANSLATION + 1e-12:
        raise NoiseBoundsExceeded("translation noise outside bounds")
    if abs(noise.rotation_angle) > MAX_NOISE_ROTATION + 1e-12:
        raise NoiseBoundsExceeded("rotation noise outside bounds")

    q_noise = quat_from_axis_angle(noise.rotation_axis, noise.rotation_angle)
    origin = web.frame.translation
    rot = web.frame.rotation

    def move_point(p):
        local = web.frame.inverse_point(p)
        moved = Pose(noise.translation, q_noise).transform_point(local)
        return web.frame.transform_point(moved)

    def move_direction(d):
        local = web.frame.inverse_direction(d)
        from .transforms import quat_rotate

        return web.frame.transform_direction(quat_rotate(q_noise, local))

    contacts = [(move_point(c), move_direction(n)) for c, n in web.contacts]
    new_frame = Pose(
        move_point(origin), quat_multiply(rot, q_noise)
    )
    return ContactWeb(contacts, web.grasp_type, new_frame)


def web_on_surface(web: ContactWeb, obj: SuperquadricObject, band=SURFACE_BAND) -> bool:
    return all(band[0] <= obj.inside_outside(c) <= band[1] for c, _ in web.contacts)
