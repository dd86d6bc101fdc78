import numpy as np
import pytest

from graspweb.contact_web import (
    ApproachDirection,
    ContactWeb,
    GraspType,
    MAX_NOISE_ROTATION,
    MAX_NOISE_TRANSLATION,
    NoiseBoundsExceeded,
    WebNoise,
    perturb_web,
    place_web,
    web_on_surface,
)
from graspweb.geometry import EPS_EXPONENT_MIN, SuperquadricObject, SuperquadricParams
from graspweb.transforms import Pose, quat_from_axis_angle, random_unit_vector


def make_object(a1=0.02, a2=0.04, eps2=1.0, pose=None):
    params = SuperquadricParams(a1, a2, 0.04, EPS_EXPONENT_MIN, eps2)
    return SuperquadricObject(params, pose or Pose.identity())


# ----------------------------------------------------------------------
# Placement
# ----------------------------------------------------------------------

def test_active_force_antipodal_contacts():
    obj = make_object(eps2=1.0)
    web = place_web(obj, GraspType.ACTIVE_FORCE)
    assert len(web.contacts) == 2
    (c1, n1), (c2, n2) = web.contacts
    # oracle: bisect the implicit surface along +-y at the contact height,
    # then require n = -surface_normal there
    z_c = 0.04 * 0.5  # 75% of height above the base
    for c, n, sign in ((c1, n1, 1), (c2, n2, -1)):
        assert c[2] == pytest.approx(z_c, abs=1e-9)
        assert sign * c[1] > 0
        assert np.allclose(n, -obj.surface_normal(c), atol=1e-9)
        assert abs(obj.inside_outside(c) - 1.0) < 1e-9
    assert np.allclose(c1[:2], -c2[:2], atol=1e-9)  # antipodal in the x-y plane


def test_passive_force_has_downward_palm_contact():
    for eps2 in (EPS_EXPONENT_MIN, 1.0, 2.0):
        web = place_web(make_object(eps2=eps2), GraspType.PASSIVE_FORCE)
        assert len(web.contacts) == 3
        c, n = web.contacts[2]
        assert c[2] == pytest.approx(0.04, abs=1e-6)  # on the top face
        angle = np.arccos(np.clip(np.dot(n, [0, 0, -1]), -1, 1))
        assert angle < np.deg2rad(5.0)


def test_passive_form_single_hook_contact():
    obj = make_object(a1=0.01, a2=0.01)
    web = place_web(obj, GraspType.PASSIVE_FORM)
    assert len(web.contacts) == 1
    c, n = web.contacts[0]
    assert abs(obj.inside_outside(c) - 1.0) < 0.02
    assert c[0] < 0  # far side
    assert np.dot(n, [1.0, 0.0, 0.0]) > 0.9  # pointing back toward the approach side


def test_contacts_perpendicular_to_surface():
    rng = np.random.default_rng(40)
    for _ in range(20):
        obj = make_object(
            a1=rng.uniform(0.01, 0.03), a2=rng.uniform(0.03, 0.05),
            eps2=rng.uniform(EPS_EXPONENT_MIN, 2.0),
        )
        web = place_web(obj, GraspType.ACTIVE_FORCE)
        for c, n in web.contacts:
            out = obj.surface_normal(c)
            # tangent vectors are orthogonal to the outward normal
            t1 = np.cross(out, [1.0, 0.0, 0.0])
            if np.linalg.norm(t1) < 1e-6:
                t1 = np.cross(out, [0.0, 1.0, 0.0])
            t1 /= np.linalg.norm(t1)
            t2 = np.cross(out, t1)
            assert abs(np.dot(n, t1)) < 1e-3
            assert abs(np.dot(n, t2)) < 1e-3


def test_web_rides_object_pose():
    pose = Pose(np.array([0.3, -0.1, 0.05]), quat_from_axis_angle([0, 0, 1], 0.6))
    obj = make_object(pose=pose)
    web = place_web(obj, GraspType.ACTIVE_FORCE)
    assert web_on_surface(web, obj)
    local_web = place_web(make_object(), GraspType.ACTIVE_FORCE)
    for (c_w, n_w), (c_l, n_l) in zip(web.contacts, local_web.contacts):
        assert np.allclose(c_w, pose.transform_point(c_l), atol=1e-9)
        assert np.allclose(n_w, pose.transform_direction(n_l), atol=1e-9)


def test_contact_count_enforced():
    obj = make_object()
    web = place_web(obj, GraspType.ACTIVE_FORCE)
    with pytest.raises(ValueError):
        ContactWeb(web.contacts, GraspType.PASSIVE_FORCE, web.frame)


# ----------------------------------------------------------------------
# Noise
# ----------------------------------------------------------------------

def test_zero_noise_is_identity():
    web = place_web(make_object(), GraspType.ACTIVE_FORCE)
    same = perturb_web(web, WebNoise.zero())
    for (c0, n0), (c1, n1) in zip(web.contacts, same.contacts):
        assert np.allclose(c0, c1, atol=1e-12)
        assert np.allclose(n0, n1, atol=1e-12)


def test_pure_translation_shifts_contacts():
    web = place_web(make_object(), GraspType.ACTIVE_FORCE)
    # web frame is axis-aligned here, so a local translation is a world shift
    t = np.array([0.003, 0.0, 0.0])
    moved = perturb_web(web, WebNoise(t, np.array([0, 0, 1.0]), 0.0))
    world_shift = web.frame.transform_direction(t)
    for (c0, n0), (c1, n1) in zip(web.contacts, moved.contacts):
        assert np.allclose(c1, c0 + world_shift, atol=1e-12)
        assert np.allclose(n1, n0, atol=1e-12)


def test_max_rotation_tilts_directions_by_exactly_the_angle():
    web = place_web(make_object(), GraspType.ACTIVE_FORCE)
    noise = WebNoise(np.zeros(3), np.array([0, 0, 1.0]), MAX_NOISE_ROTATION)
    moved = perturb_web(web, noise)
    for (c0, n0), (c1, n1) in zip(web.contacts, moved.contacts):
        # lateral contact directions are perpendicular to the z rotation axis
        ang = np.arccos(np.clip(np.dot(n0, n1), -1, 1))
        assert ang == pytest.approx(MAX_NOISE_ROTATION, abs=1e-9)


def test_perturb_preserves_pairwise_distances():
    rng = np.random.default_rng(41)
    web = place_web(make_object(), GraspType.PASSIVE_FORCE)
    for _ in range(20):
        noise = WebNoise.sample(rng)
        moved = perturb_web(web, noise)
        for i in range(3):
            for j in range(i + 1, 3):
                d0 = np.linalg.norm(web.contacts[i][0] - web.contacts[j][0])
                d1 = np.linalg.norm(moved.contacts[i][0] - moved.contacts[j][0])
                assert d1 == pytest.approx(d0, abs=1e-12)


def test_noise_bounds_enforced():
    with pytest.raises(NoiseBoundsExceeded):
        WebNoise(np.array([0.006, 0, 0]), np.array([0, 0, 1.0]), 0.0)
    with pytest.raises(NoiseBoundsExceeded):
        WebNoise(np.zeros(3), np.array([0, 0, 1.0]), np.deg2rad(2.0))


def test_sampled_noise_within_bounds():
    rng = np.random.default_rng(42)
    for _ in range(2000):
        n = WebNoise.sample(rng)
        assert np.linalg.norm(n.translation) <= MAX_NOISE_TRANSLATION + 1e-12
        assert abs(n.rotation_angle) <= MAX_NOISE_ROTATION + 1e-12


# ----------------------------------------------------------------------
# Frame transforms
# ----------------------------------------------------------------------

def test_identity_frame_passthrough():
    web = place_web(make_object(), GraspType.ACTIVE_FORCE)
    # active-force frame on the canonical object is axis-aligned at the
    # contact centroid
    p = np.array([0.01, 0.02, 0.03])
    local = web.to_web_point(p)
    assert np.allclose(web.from_web_point(local), p, atol=1e-12)
    assert np.allclose(web.to_web_point(web.center), np.zeros(3), atol=1e-12)


def test_frame_round_trips():
    rng = np.random.default_rng(43)
    pose = Pose(rng.normal(size=3), quat_from_axis_angle(random_unit_vector(rng), 0.9))
    web = place_web(make_object(pose=pose), GraspType.ACTIVE_FORCE)
    for _ in range(50):
        p = rng.normal(size=3)
        assert np.allclose(web.from_web_point(web.to_web_point(p)), p, atol=1e-9)
        d = random_unit_vector(rng)
        local = web.to_web_direction(d)
        assert np.allclose(np.linalg.norm(local), 1.0, atol=1e-12)


def test_approach_vector_zenith_zero_is_frame_z():
    web = place_web(make_object(), GraspType.ACTIVE_FORCE)
    d = web.approach_vector(ApproachDirection(0.0, 0.0))
    assert np.allclose(d, web.frame.matrix()[:, 2], atol=1e-12)


def test_approach_direction_bounds():
    with pytest.raises(ValueError):
        ApproachDirection(-0.1, 0.0)
    with pytest.raises(ValueError):
        ApproachDirection(np.pi / 2 + 0.1, 0.0)


def test_web_serialization_round_trip():
    web = place_web(make_object(), GraspType.PASSIVE_FORCE)
    again = ContactWeb.from_dict(web.to_dict())
    assert again.grasp_type == web.grasp_type
    for (c0, n0), (c1, n1) in zip(web.contacts, again.contacts):
        assert np.allclose(c0, c1)
        assert np.allclose(n0, n1)
