import numpy as np
import pytest

from graspweb.geometry import (
    DegeneratePoint,
    EPS_EXPONENT_MIN,
    EnvironmentalPlane,
    SuperquadricObject,
    SuperquadricParams,
    inside_outside,
    parametric_surface_point,
    plane_signed_distance,
    surface_normal,
    surface_sample,
)
from graspweb.transforms import Pose, quat_from_axis_angle, quat_rotate, random_unit_vector


ELLIPSOID = SuperquadricParams(0.02, 0.04, 0.04, 1.0, 1.0)
BOXY = SuperquadricParams(0.02, 0.04, 0.04, EPS_EXPONENT_MIN, EPS_EXPONENT_MIN)
IDENT = Pose.identity()


def random_params(rng) -> SuperquadricParams:
    return SuperquadricParams(
        a1=rng.uniform(0.01, 0.03),
        a2=rng.uniform(0.03, 0.05),
        a3=0.04,
        eps1=EPS_EXPONENT_MIN,
        eps2=rng.uniform(EPS_EXPONENT_MIN, 2.0),
    )


def test_center_is_zero():
    assert inside_outside(ELLIPSOID, IDENT, [0, 0, 0]) == 0.0


def test_axis_surface_points_are_one():
    for params in (ELLIPSOID, BOXY):
        for p in ([params.a1, 0, 0], [0, params.a2, 0], [0, 0, params.a3]):
            assert inside_outside(params, IDENT, p) == pytest.approx(1.0, abs=1e-12)


def test_parametric_points_satisfy_implicit_equation():
    # dual-route check: the parametric surface is independent of the
    # implicit form, so sampled points must evaluate to F = 1
    rng = np.random.default_rng(10)
    for _ in range(5):
        params = random_params(rng)
        pts = surface_sample(params, IDENT, 2000, rng)
        f = [inside_outside(params, IDENT, p) for p in pts]
        assert max(abs(v - 1.0) for v in f) < 1e-6


def test_sphere_sample_distances():
    params = SuperquadricParams(0.03, 0.03, 0.03, 1.0, 1.0)
    rng = np.random.default_rng(11)
    pts = surface_sample(params, IDENT, 500, rng)
    r = np.linalg.norm(pts, axis=1)
    assert np.all(np.abs(r - 0.03) < 1e-6)


def test_boxy_sample_extremes():
    rng = np.random.default_rng(12)
    pts = surface_sample(BOXY, IDENT, 10_000, rng)
    for axis, extent in enumerate(BOXY.half_extents):
        assert pts[:, axis].max() > 0.99 * extent
        assert pts[:, axis].min() < -0.99 * extent
        assert np.all(np.abs(pts[:, axis]) <= extent * 1.01)


def test_surface_sample_with_pose():
    rng = np.random.default_rng(13)
    pose = Pose(np.array([0.1, -0.2, 0.05]), quat_from_axis_angle([0, 0, 1], 0.8))
    pts = surface_sample(ELLIPSOID, pose, 200, rng)
    f = [inside_outside(ELLIPSOID, pose, p) for p in pts]
    assert max(abs(v - 1.0) for v in f) < 1e-6


def test_normal_at_axis_points():
    n = surface_normal(ELLIPSOID, IDENT, [ELLIPSOID.a1, 0, 0])
    assert np.allclose(n, [1, 0, 0], atol=1e-12)
    for params in (ELLIPSOID, BOXY, SuperquadricParams(0.02, 0.04, 0.04, 0.3, 1.7)):
        n = surface_normal(params, IDENT, [0, 0, params.a3])
        assert np.allclose(n, [0, 0, 1], atol=1e-12)


def _fd_gradient(params, p, h=1e-6):
    g = np.zeros(3)
    for i in range(3):
        dp = np.zeros(3)
        dp[i] = h
        g[i] = (
            inside_outside(params, IDENT, p + dp) - inside_outside(params, IDENT, p - dp)
        ) / (2 * h)
    return g


def test_normal_matches_finite_differences():
    rng = np.random.default_rng(14)
    worst = 0.0
    for _ in range(300):
        params = random_params(rng)
        u = rng.uniform(-np.pi / 2, np.pi / 2)
        v = rng.uniform(-np.pi, np.pi)
        p = parametric_surface_point(params, u, v)
        n = surface_normal(params, IDENT, p)
        fd = _fd_gradient(params, p)
        err = np.linalg.norm(n - fd / np.linalg.norm(fd))
        worst = max(worst, err)
    assert worst < 1e-5


def test_normal_rotates_with_pose():
    rng = np.random.default_rng(15)
    for _ in range(50):
        params = random_params(rng)
        u, v = rng.uniform(-1.2, 1.2), rng.uniform(-np.pi, np.pi)
        local = parametric_surface_point(params, u, v)
        n_local = surface_normal(params, IDENT, local)
        pose = Pose(rng.normal(size=3), quat_from_axis_angle(random_unit_vector(rng), rng.uniform(0, np.pi)))
        n_world = surface_normal(params, pose, pose.transform_point(local))
        assert np.allclose(n_world, quat_rotate(pose.rotation, n_local), atol=1e-9)


def test_inside_outside_rigid_invariance():
    rng = np.random.default_rng(16)
    params = random_params(rng)
    p = rng.normal(scale=0.03, size=3)
    f0 = inside_outside(params, IDENT, p)
    pose = Pose(rng.normal(size=3), quat_from_axis_angle(random_unit_vector(rng), 1.1))
    assert inside_outside(params, pose, pose.transform_point(p)) == pytest.approx(f0, rel=1e-9)


def test_ray_monotonicity():
    rng = np.random.default_rng(17)
    for _ in range(200):
        params = random_params(rng)
        d = random_unit_vector(rng)
        ts = np.linspace(0.2, 3.0, 30)
        f = [inside_outside(params, IDENT, t * d * 0.03) for t in ts]
        assert all(f[i] <= f[i + 1] + 1e-12 for i in range(len(f) - 1))


def test_degenerate_point_raises():
    with pytest.raises(DegeneratePoint):
        surface_normal(ELLIPSOID, IDENT, [0, 0, 0])


def test_exponents_validated():
    with pytest.raises(ValueError):
        SuperquadricParams(0.02, 0.04, 0.04, 1.0, 0.0)
    with pytest.raises(ValueError):
        SuperquadricParams(-0.02, 0.04, 0.04, 1.0, 1.0)


def test_radial_projection_exact():
    rng = np.random.default_rng(18)
    obj = SuperquadricObject(random_params(rng), IDENT)
    for _ in range(50):
        p = rng.normal(scale=0.05, size=3)
        x = obj.radial_project(p, level=1.0)
        assert obj.inside_outside(x) == pytest.approx(1.0, abs=1e-9)


def test_closest_point_beats_radial_distance():
    rng = np.random.default_rng(19)
    obj = SuperquadricObject(BOXY, IDENT)
    for _ in range(50):
        p = rng.normal(scale=0.06, size=3)
        radial = np.linalg.norm(p - obj.radial_project(p))
        closest = np.linalg.norm(p - obj.closest_surface_point(p))
        assert closest <= radial + 1e-9


def test_surface_distance_oracle_on_sphere():
    # analytic distance available for the sphere case
    obj = SuperquadricObject(SuperquadricParams(0.03, 0.03, 0.03, 1.0, 1.0), IDENT)
    rng = np.random.default_rng(20)
    for _ in range(30):
        p = rng.normal(scale=0.05, size=3)
        expected = np.linalg.norm(p) - 0.03
        assert obj.surface_distance(p) == pytest.approx(expected, abs=2e-4)


# ----------------------------------------------------------------------
# Environmental plane
# ----------------------------------------------------------------------

def test_plane_signed_distance():
    plane = EnvironmentalPlane(np.array([1.0, 0.0, 0.0]), offset=-0.035, clearance=0.025)
    assert plane_signed_distance(plane, [-0.035, 0.3, -2.0]) == pytest.approx(0.0)
    assert plane_signed_distance(plane, [-0.035 + 0.01, 0, 0]) == pytest.approx(0.01)
    rng = np.random.default_rng(21)
    n = random_unit_vector(rng)
    anchor = rng.normal(size=3)
    plane = EnvironmentalPlane(n, float(np.dot(n, anchor)))
    for _ in range(20):
        p = rng.normal(size=3)
        assert plane_signed_distance(plane, p) == pytest.approx(float(np.dot(n, p - anchor)))


def test_plane_validates_normal():
    with pytest.raises(ValueError):
        EnvironmentalPlane(np.array([1.0, 1.0, 0.0]), 0.0)
    with pytest.raises(ValueError):
        EnvironmentalPlane(np.array([1.0, 0.0, 0.0]), 0.0, clearance=-0.1)
