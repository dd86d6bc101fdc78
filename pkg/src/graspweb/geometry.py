"""Superquadric solids and the environmental plane.

A superquadric with half-extents (a1, a2, a3) and exponents (eps1, eps2) is
the solid bounded by the implicit surface F = 1, with

    F(x, y, z) = (|x/a1|^(2/eps2) + |y/a2|^(2/eps2))^(eps2/eps1) + |z/a3|^(2/eps1)

F < 1 inside, F = 1 on the surface, F > 1 outside.  eps2 shapes the
horizontal cross-section (small -> rectangle, 1 -> ellipse, 2 -> diamond)
and eps1 shapes the vertical profile.  Exponents are kept in
[EPS_EXPONENT_MIN, 2]: the implicit form is singular at 0, and a small
positive exponent already renders a visually sharp box while keeping the
gradient finite.

F is homogeneous along rays through the center: F(t*p) = t^(2/eps1) F(p)
for t >= 0.  Surface projection and signed-distance queries below lean on
that identity (radial projection onto any level set is exact).

The matching parametric surface is

    x = a1 * sgn(cos u) |cos u|^eps1 * sgn(cos v) |cos v|^eps2
    y = a2 * sgn(cos u) |cos u|^eps1 * sgn(sin v) |sin v|^eps2
    z = a3 * sgn(sin u) |sin u|^eps1

for u in [-pi/2, pi/2], v in [-pi, pi]; it is used for surface sampling and
serves as an independent cross-check of the implicit form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transforms import Pose

EPS_EXPONENT_MIN = 0.05
EPS_EXPONENT_MAX = 2.0

# A point counts as "on the surface" when F is inside this band; a
# quasi-static simulator without penetration resolution needs the slack.
SURFACE_BAND = (0.98, 1.02)


class DegeneratePoint(Exception):
    """Surface gradient vanished (exponent-induced singularity)."""


@dataclass(frozen=True)
class SuperquadricParams:
    """Half-extents in meters, exponents dimensionless."""

    a1: float  # half-depth
    a2: float  # half-width
    a3: float  # half-height
    eps1: float = EPS_EXPONENT_MIN
    eps2: float = 1.0

    def __post_init__(self):
        for name in ("a1", "a2", "a3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("eps1", "eps2"):
            e = getattr(self, name)
            if not (EPS_EXPONENT_MIN <= e <= EPS_EXPONENT_MAX):
                raise ValueError(
                    f"{name}={e} outside [{EPS_EXPONENT_MIN}, {EPS_EXPONENT_MAX}]"
                )

    @property
    def half_extents(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3])

    def to_dict(self) -> dict:
        return {
            "a1": self.a1,
            "a2": self.a2,
            "a3": self.a3,
            "eps1": self.eps1,
            "eps2": self.eps2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SuperquadricParams":
        return cls(**{k: float(d[k]) for k in ("a1", "a2", "a3", "eps1", "eps2")})


@dataclass(frozen=True)
class EnvironmentalPlane:
    """Half-space boundary near the grasp object (e.g. the door a handle is
    mounted on).  `normal` points away from the plane toward the object;
    `offset` is the plane constant in n.x = offset form."""

    normal: np.ndarray
    offset: float
    clearance: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        nn = np.linalg.norm(n)
        if abs(nn - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        if self.clearance < 0:
            raise ValueError("clearance must be >= 0")
        object.__setattr__(self, "normal", n / nn)

    def to_dict(self) -> dict:
        return {
            "normal": self.normal.tolist(),
            "offset": self.offset,
            "clearance": self.clearance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentalPlane":
        return cls(np.array(d["normal"]), float(d["offset"]), float(d.get("clearance", 0.0)))


def plane_signed_distance(plane: EnvironmentalPlane, point) -> float:
    """Positive on the normal side of the plane (toward the object)."""
    return float(np.dot(plane.normal, np.asarray(point, dtype=float)) - plane.offset)


def _local_inside_outside(params: SuperquadricParams, p: np.ndarray) -> np.ndarray:
    """F in the object's local frame; p is (..., 3)."""
    p = np.asarray(p, dtype=float)
    x = np.abs(p[..., 0] / params.a1)
    y = np.abs(p[..., 1] / params.a2)
    z = np.abs(p[..., 2] / params.a3)
    g = x ** (2.0 / params.eps2) + y ** (2.0 / params.eps2)
    return g ** (params.eps2 / params.eps1) + z ** (2.0 / params.eps1)


def _local_gradient(params: SuperquadricParams, p: np.ndarray) -> np.ndarray:
    """Analytic gradient of F in the local frame, with the 0*inf products
    at coordinate planes resolved to their limits (valid for exponents < 2)."""
    x, y, z = float(p[0]), float(p[1]), float(p[2])
    e1, e2 = params.eps1, params.eps2
    u = abs(x / params.a1) ** (2.0 / e2)
    v = abs(y / params.a2) ** (2.0 / e2)
    g = u + v

    grad = np.zeros(3)
    if g > 0.0:
        # d/dx g^(e2/e1) = (2/e1) g^(e2/e1 - 1) u^(1 - e2/2) sgn(x)/a1
        gpow = g ** (e2 / e1 - 1.0)
        if u > 0.0:
            grad[0] = (2.0 / e1) * gpow * u ** (1.0 - e2 / 2.0) * np.sign(x) / params.a1
        if v > 0.0:
            grad[1] = (2.0 / e1) * gpow * v ** (1.0 - e2 / 2.0) * np.sign(y) / params.a2
    if z != 0.0:
        grad[2] = (
            (2.0 / e1) * abs(z / params.a3) ** (2.0 / e1 - 1.0) * np.sign(z) / params.a3
        )
    return grad


def inside_outside(params: SuperquadricParams, pose: Pose, point) -> float:
    """Implicit function value at a world point (scalar)."""
    return float(_local_inside_outside(params, pose.inverse_point(point)))


def surface_normal(params: SuperquadricParams, pose: Pose, surface_point) -> np.ndarray:
    """Outward unit normal (normalized gradient of F) at a surface point."""
    local = pose.inverse_point(surface_point)
    grad = _local_gradient(params, local)
    n = np.linalg.norm(grad)
    if n < 1e-12:
        raise DegeneratePoint(f"gradient vanished at local point {local}")
    return pose.transform_direction(grad / n)


def parametric_surface_point(params: SuperquadricParams, u: float, v: float) -> np.ndarray:
    """Local-frame surface point for angles u in [-pi/2, pi/2], v in [-pi, pi]."""
    cu, su = np.cos(u), np.sin(u)
    cv, sv = np.cos(v), np.sin(v)
    e1, e2 = params.eps1, params.eps2
    fu = np.sign(cu) * np.abs(cu) ** e1
    return np.array(
        [
            params.a1 * fu * np.sign(cv) * np.abs(cv) ** e2,
            params.a2 * fu * np.sign(sv) * np.abs(sv) ** e2,
            params.a3 * np.sign(su) * np.abs(su) ** e1,
        ]
    )


def surface_sample(
    params: SuperquadricParams, pose: Pose, count: int, rng: np.random.Generator | None = None
) -> np.ndarray:
    """`count` world-frame points on the F = 1 surface, (count, 3).

    Sampling is uniform in the (u, v) parameter angles, which is enough for
    coverage tests and contact-web placement; it is not area-uniform.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    u = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=count)
    v = rng.uniform(-np.pi, np.pi, size=count)
    pts = np.stack([parametric_surface_point(params, ui, vi) for ui, vi in zip(u, v)])
    return pose.transform_point(pts)


@dataclass
class SuperquadricObject:
    """A posed superquadric: the graspable body used everywhere downstream."""

    params: SuperquadricParams
    pose: Pose = field(default_factory=Pose.identity)

    def inside_outside(self, point) -> float:
        return inside_outside(self.params, self.pose, point)

    def surface_normal(self, point) -> np.ndarray:
        return surface_normal(self.params, self.pose, point)

    def sample_surface(self, count: int, rng: np.random.Generator | None = None) -> np.ndarray:
        return surface_sample(self.params, self.pose, count, rng)

    def on_surface(self, point, band=SURFACE_BAND) -> bool:
        return band[0] <= self.inside_outside(point) <= band[1]

    # ------------------------------------------------------------------
    # Distance / projection queries (used by contact detection)
    # ------------------------------------------------------------------
    def radial_project(self, point, level: float = 1.0) -> np.ndarray:
        """Exact projection of a world point onto the F = level set along the
        ray through the object center (homogeneity of F)."""
        local = self.pose.inverse_point(point)
        f = float(_local_inside_outside(self.params, local))
        if f <= 0.0:
            # center: no ray direction; pick the closest face pole instead
            local = np.array([0.0, 0.0, self.params.a3 * level ** (self.params.eps1 / 2.0)])
            return self.pose.transform_point(local)
        t = (level / f) ** (self.params.eps1 / 2.0)
        return self.pose.transform_point(t * local)

    def closest_surface_point(self, point, level: float = 1.0, iterations: int = 15) -> np.ndarray:
        """Approximate closest point on the F = level set.

        Starts from the (exact) radial projection and walks along the surface
        tangent toward the query point, re-projecting radially after each
        step.  Converges well for the convex bodies used here (exponents
        <= 2); accuracy is sub-millimeter at desk scale, which is all the
        fingertip-sized contact band requires.
        """
        p = np.asarray(point, dtype=float)
        x = self.radial_project(p, level)
        for _ in range(iterations):
            local = self.pose.inverse_point(x)
            grad = _local_gradient(self.params, local)
            gn = np.linalg.norm(grad)
            if gn < 1e-12:
                break
            n_world = self.pose.transform_direction(grad / gn)
            v = p - x
            v_t = v - np.dot(v, n_world) * n_world
            if np.linalg.norm(v_t) < 1e-12:
                break
            x = self.radial_project(x + 0.7 * v_t, level)
        return x

    def surface_distance(self, point, level: float = 1.0) -> float:
        """Signed distance to the F = level set: positive outside."""
        p = np.asarray(point, dtype=float)
        x = self.closest_surface_point(p, level)
        d = float(np.linalg.norm(p - x))
        f = float(_local_inside_outside(self.params, self.pose.inverse_point(p)))
        return d if f >= level else -d

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "pose": self.pose.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "SuperquadricObject":
        return cls(SuperquadricParams.from_dict(d["params"]), Pose.from_dict(d["pose"]))
