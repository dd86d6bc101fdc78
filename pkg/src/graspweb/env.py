"""Quasi-static grasp episode environment.

One episode: the wrist starts on a sphere around the *recognized* contact
web, slides along the fixed approach direction while the fingers articulate,
and the reward drives the finger pads onto the *actual* web (the recognized
one carries recognition noise; observations use it, rewards do not).

The object is quasi-static: it does not fall or slide on its own, but net
fingertip pushing displaces it compliantly (and yaws it about the vertical
axis).  Crossing the motion limit is a terminating violation, so full rigid
body dynamics are never needed.

Grasp success for the force closures is a friction-cone feasibility check:
can contact forces inside the friction cones at the achieved contacts
balance the external force (gravity on the object)?  This replaces a
time-stepped lift with an equivalent quasi-static criterion and keeps the
outcome deterministic.  The hook grasp instead checks the geometric hook
condition behind the environmental plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from .contact_web import ApproachDirection, ContactWeb, GraspType
from .geometry import EnvironmentalPlane, SuperquadricObject, SURFACE_BAND, plane_signed_distance
from .gripper import BIND, PALM, THUMB, FingerContactState, GripperModel, GripperState, apply_action, forward_kinematics
from .reward import (
    Event,
    FingerSnapshot,
    GuidanceSchedule,
    PENALTY_EVENTS,
    Phase,
    RewardConfig,
    StepContext,
    direction_error,
    evaluation_reward,
    step_reward,
)
from .transforms import Pose, quat_multiply, quat_to_matrix, rotation_6d, rotation_about_y, rotation_about_z, matrix_to_quat


class SteppedTerminatedEpisode(Exception):
    pass


class InvalidSample(Exception):
    """Start pose penetrates the object or the environmental plane."""


class Outcome:
    SUCCESS = "success"
    TIMEOUT = "timeout"
    LOST_CONTACT = "lost-contact"
    OBJECT_MOVED = "object-moved"
    LIFT_FAIL = "lift-fail"
    PLACEMENT_FAIL = "placement-fail"
    PLANE_COLLISION = "plane-collision"


_EVENT_OUTCOME = {
    Event.APPROACH_TIMEOUT: Outcome.TIMEOUT,
    Event.CONTACT_TIMEOUT: Outcome.TIMEOUT,
    Event.LOST_CONTACT: Outcome.LOST_CONTACT,
    Event.OBJECT_MOVED: Outcome.OBJECT_MOVED,
    Event.PLANE_COLLISION: Outcome.PLANE_COLLISION,
    Event.LIFT_FAILED: Outcome.LIFT_FAIL,
    Event.FORM_FAILED: Outcome.LIFT_FAIL,
    Event.LIFT_PASSED: Outcome.SUCCESS,
    Event.FORM_PASSED: Outcome.SUCCESS,
}


@dataclass(frozen=True)
class EnvConfig:
    step_duration: float = 0.1      # seconds per control step
    approach_radius: float = 0.15   # wrist start distance from the web center
    object_compliance: float = 0.5  # object translation per unit push depth
    rotation_compliance: float = 2.0
    push_dead_zone: float = 0.002   # pad may sink this deep before pushing
    plane_clearance: float = 0.025  # hook-training gap between plane and object

    def to_dict(self) -> dict:
        return {
            "step_duration": self.step_duration,
            "approach_radius": self.approach_radius,
            "object_compliance": self.object_compliance,
            "rotation_compliance": self.rotation_compliance,
            "push_dead_zone": self.push_dead_zone,
            "plane_clearance": self.plane_clearance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class LiftTestConfig:
    """External-force resistance test parameters.

    The default external force is gravity on the object mass.  The test is
    a quasi-static feasibility check; hold_duration and
    displacement_tolerance bound the equivalent dynamic check and are kept
    for config compatibility with time-stepped variants.
    """

    object_mass: float = 0.2
    friction: float = 0.5
    external_force: tuple | None = None  # None -> (0, 0, -mass * g)
    hold_duration: int = 1
    displacement_tolerance: float = 0.005
    cone_facets: int = 8
    gravity: float = 9.81

    def __post_init__(self):
        if self.hold_duration < 1:
            raise ValueError("hold_duration must be >= 1")
        if self.friction < 0:
            raise ValueError("friction must be >= 0")

    def force_vector(self) -> np.ndarray:
        if self.external_force is not None:
            return np.asarray(self.external_force, dtype=float).reshape(3)
        return np.array([0.0, 0.0, -self.object_mass * self.gravity])

    def to_dict(self) -> dict:
        return {
            "object_mass": self.object_mass,
            "friction": self.friction,
            "external_force": list(self.external_force) if self.external_force is not None else None,
            "hold_duration": self.hold_duration,
            "displacement_tolerance": self.displacement_tolerance,
            "cone_facets": self.cone_facets,
            "gravity": self.gravity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LiftTestConfig":
        d = dict(d)
        if d.get("external_force") is not None:
            d["external_force"] = tuple(d["external_force"])
        return cls(
            object_mass=float(d["object_mass"]),
            friction=float(d["friction"]),
            external_force=d.get("external_force"),
            hold_duration=int(d.get("hold_duration", 1)),
            displacement_tolerance=float(d.get("displacement_tolerance", 0.005)),
            cone_facets=int(d.get("cone_facets", 8)),
            gravity=float(d.get("gravity", 9.81)),
        )


# ----------------------------------------------------------------------
# Contact detection
# ----------------------------------------------------------------------

@dataclass
class ContactInfo:
    name: str
    in_contact: bool
    contact_point: np.ndarray | None      # projection onto F = 1
    outward_normal: np.ndarray | None     # surface normal at the contact point
    surface_distance: float               # signed center distance to F = 1
    plane_distance: float | None = None   # signed center distance to the plane


def detect_contacts(
    obj: SuperquadricObject,
    plane: EnvironmentalPlane | None,
    contact_state: FingerContactState,
    radius: float,
    band=SURFACE_BAND,
) -> dict[str, ContactInfo]:
    """Flag each contact body whose pad sphere intersects the surface band.

    A body is in contact when its sphere (pad center, pad radius) reaches
    the F in [band] shell: either the center itself lies in the band, or
    the nearer band level set is within the radius.
    """
    lo, hi = band
    # Conservative reach bound: the body cannot touch anything farther than
    # the object's bounding sphere plus the pad radius.
    bound = float(np.linalg.norm(obj.params.half_extents)) * hi ** (obj.params.eps1 / 2.0) + radius

    infos: dict[str, ContactInfo] = {}
    for body in contact_state:
        center = body.center
        plane_d = plane_signed_distance(plane, center) if plane is not None else None
        r_center = float(np.linalg.norm(center - obj.pose.translation))
        if r_center > bound + 1e-9:
            infos[body.name] = ContactInfo(body.name, False, None, None, r_center, plane_d)
            continue

        f = obj.inside_outside(center)
        if lo <= f <= hi:
            touching = True
        else:
            level = hi if f > hi else lo
            proj_band = obj.closest_surface_point(center, level=level, iterations=10)
            touching = float(np.linalg.norm(center - proj_band)) <= radius

        surf_point = obj.closest_surface_point(center, level=1.0, iterations=10)
        d_surf = float(np.linalg.norm(center - surf_point))
        if f < 1.0:
            d_surf = -d_surf
        normal = obj.surface_normal(surf_point) if touching else None
        infos[body.name] = ContactInfo(
            body.name, touching, surf_point if touching else None, normal, d_surf, plane_d
        )
    return infos


# ----------------------------------------------------------------------
# Grasp success tests
# ----------------------------------------------------------------------

def friction_cone_feasible(
    contact_points: np.ndarray,
    inward_normals: np.ndarray,
    external_force: np.ndarray,
    friction: float,
    cone_facets: int = 8,
) -> bool:
    """Can forces inside the (linearized) friction cones sum to the reaction
    of the external force?  Feasibility is solved as a slack-minimizing LP
    over nonnegative cone-edge weights."""
    points = np.atleast_2d(np.asarray(contact_points, dtype=float))
    normals = np.atleast_2d(np.asarray(inward_normals, dtype=float))
    if len(points) == 0:
        return False

    edges = []
    for n in normals:
        n = n / np.linalg.norm(n)
        # tangent basis
        ref = np.array([1.0, 0.0, 0.0])
        if abs(np.dot(ref, n)) > 0.9:
            ref = np.array([0.0, 1.0, 0.0])
        t1 = np.cross(n, ref)
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        if friction <= 1e-12:
            edges.append(n)
            continue
        for j in range(cone_facets):
            ang = 2.0 * np.pi * j / cone_facets
            e = n + friction * (np.cos(ang) * t1 + np.sin(ang) * t2)
            edges.append(e / np.linalg.norm(e))
    A = np.column_stack(edges)  # 3 x m

    b = -np.asarray(external_force, dtype=float).reshape(3)
    scale = max(1.0, float(np.linalg.norm(b)))
    m = A.shape[1]
    # variables: lambda (m), s+ (3), s- (3); minimize sum of slacks
    A_eq = np.hstack([A, np.eye(3), -np.eye(3)])
    c = np.concatenate([np.zeros(m), np.ones(6)])
    res = linprog(c, A_eq=A_eq, b_eq=b, bounds=[(0, None)] * (m + 6), method="highs")
    if not res.success:
        return False
    return float(res.fun) <= 1e-9 * scale


def lift_test(
    contact_infos: list[ContactInfo],
    direction_errors: list[float],
    config: LiftTestConfig,
    align_threshold: float,
) -> bool:
    """External-force resistance at the achieved contacts: friction-cone
    feasibility plus converged contact directions."""
    if any(not info.in_contact for info in contact_infos):
        return False
    if any(err >= align_threshold for err in direction_errors):
        return False
    points = np.array([info.contact_point for info in contact_infos])
    inward = np.array([-info.outward_normal for info in contact_infos])
    return friction_cone_feasible(points, inward, config.force_vector(), config.friction, config.cone_facets)


def evaluate_form_closure(
    obj: SuperquadricObject,
    plane: EnvironmentalPlane | None,
    hook_info: ContactInfo,
    hook_center: np.ndarray,
    pad_direction: np.ndarray,
    desired_direction: np.ndarray,
    align_threshold: float,
    pad_radius: float,
) -> bool:
    """Hook achieved: fingertip sits between plane and object, touching the
    far side with its pad facing back toward the approach side."""
    if not hook_info.in_contact or hook_info.outward_normal is None:
        return False
    # Far-side contact: outward surface normal opposes the approach side.
    if float(np.dot(hook_info.outward_normal, desired_direction)) > -0.7:
        return False
    if direction_error(pad_direction, desired_direction) >= align_threshold:
        return False
    if plane is not None and plane_signed_distance(plane, hook_center) < pad_radius:
        return False
    return True


# ----------------------------------------------------------------------
# Episode state
# ----------------------------------------------------------------------

@dataclass
class FingerTracker:
    """Assignment of one contact body to one web contact, plus its frozen
    contact-time data."""

    body: str
    contact_index: int
    contact_step: int | None = None
    hold_anchor: np.ndarray | None = None


@dataclass
class EpisodeState:
    phase: Phase
    step: int
    trackers: list[FingerTracker]
    object_pose: Pose
    object_pose_initial: Pose
    seed: int
    steps_since_contact: int = 0
    accumulated_reward: float = 0.0
    outcome: str | None = None

    @property
    def object_displacement(self) -> float:
        return float(
            np.linalg.norm(self.object_pose.translation - self.object_pose_initial.translation)
        )


_ASSIGNED_BODIES = {
    GraspType.ACTIVE_FORCE: [BIND, THUMB],
    GraspType.PASSIVE_FORCE: [BIND, THUMB, PALM],
    GraspType.PASSIVE_FORM: [BIND],
}

_OBSERVED_BODIES = {
    GraspType.ACTIVE_FORCE: [BIND, THUMB],
    GraspType.PASSIVE_FORCE: [BIND, THUMB, PALM],
    GraspType.PASSIVE_FORM: [BIND, THUMB],
}


def observation_dim(grasp_type: GraspType) -> int:
    n = len(_OBSERVED_BODIES[grasp_type])
    return 3 * n + 6 + 2 + n + 2


class GraspEnv:
    """Sequential episode driver; one instance per worker, no shared state."""

    def __init__(
        self,
        gripper: GripperModel | None = None,
        reward_config: RewardConfig | None = None,
        schedule: GuidanceSchedule | None = None,
        env_config: EnvConfig | None = None,
        lift_config: LiftTestConfig | None = None,
    ):
        self.gripper = gripper or GripperModel.default()
        self.reward_config = reward_config or RewardConfig()
        self.reward_config.validate()
        self.schedule = schedule or GuidanceSchedule()
        self.env_config = env_config or EnvConfig()
        self.lift_config = lift_config or LiftTestConfig()

        # episode fields, populated by reset()
        self.state: EpisodeState | None = None
        self.sample = None
        self.obj: SuperquadricObject | None = None
        self.plane: EnvironmentalPlane | None = None
        self.recognized: ContactWeb | None = None
        self.approach: ApproachDirection | None = None
        self._actual_local: list[tuple[np.ndarray, np.ndarray]] = []
        self._grasp_type: GraspType | None = None
        self._approach_dir: np.ndarray | None = None
        self._wrist_base: np.ndarray | None = None
        self._wrist_quat: np.ndarray | None = None
        self._gripper_state: GripperState | None = None
        self._last_contacts: dict[str, ContactInfo] = {}
        self._last_fk: FingerContactState | None = None

    # ------------------------------------------------------------------
    def action_dim(self) -> int:
        return self.gripper.action_dim

    def wrist_pose(self, wrist_offset: float) -> Pose:
        return Pose(self._wrist_base + wrist_offset * self._approach_dir, self._wrist_quat)

    def actual_contacts_world(self) -> list[tuple[np.ndarray, np.ndarray]]:
        pose = self.state.object_pose
        return [
            (pose.transform_point(c), pose.transform_direction(n)) for c, n in self._actual_local
        ]

    # ------------------------------------------------------------------
    def reset(self, sample) -> tuple[EpisodeState, np.ndarray]:
        """Start an episode from a RandomizationSample."""
        self.sample = sample
        self._grasp_type = sample.grasp_type
        obj_pose = Pose.from_dict(sample.object_pose.to_dict())  # defensive copy
        self.obj = SuperquadricObject(sample.object_params, obj_pose)
        self.recognized = sample.recognized_web
        self.approach = sample.approach

        # Actual web stored object-locally so it rides object motion.
        self._actual_local = [
            (obj_pose.inverse_point(c), obj_pose.inverse_direction(n))
            for c, n in sample.actual_web.contacts
        ]

        if self._grasp_type is GraspType.PASSIVE_FORM:
            normal = obj_pose.transform_direction(np.array([1.0, 0.0, 0.0]))
            anchor = obj_pose.transform_point(
                np.array([-(self.obj.params.a1 + self.env_config.plane_clearance), 0.0, 0.0])
            )
            self.plane = EnvironmentalPlane(
                normal, float(np.dot(normal, anchor)), self.env_config.plane_clearance
            )
        else:
            self.plane = None

        self._approach_dir = self.recognized.approach_vector(self.approach)
        self._wrist_base = (
            self.recognized.center + self.env_config.approach_radius * self._approach_dir
        )
        r_local = rotation_about_z(self.approach.azimuth) @ rotation_about_y(self.approach.zenith)
        self._wrist_quat = quat_multiply(
            self.recognized.frame.rotation, matrix_to_quat(r_local)
        )
        self._gripper_state = self.gripper.rest_state()

        trackers = [
            FingerTracker(body, idx) for idx, body in enumerate(_ASSIGNED_BODIES[self._grasp_type])
        ]
        self.state = EpisodeState(
            phase=Phase.APPROACH,
            step=0,
            trackers=trackers,
            object_pose=obj_pose,
            object_pose_initial=Pose.from_dict(obj_pose.to_dict()),
            seed=sample.seed,
        )

        self._last_fk = forward_kinematics(self.gripper, self.wrist_pose(0.0), self._gripper_state)
        self._last_contacts = detect_contacts(
            self.obj, self.plane, self._last_fk, self.gripper.fingertip_radius
        )
        for info in self._last_contacts.values():
            if info.in_contact or info.surface_distance < self.gripper.fingertip_radius:
                raise InvalidSample(f"start pose touches the object at body {info.name}")
            if info.plane_distance is not None and info.plane_distance < self.gripper.fingertip_radius:
                raise InvalidSample(f"start pose touches the plane at body {info.name}")

        return self.state, self._observation()

    # ------------------------------------------------------------------
    def step(self, action) -> tuple[EpisodeState, np.ndarray, float, bool, dict]:
        st = self.state
        if st is None or st.phase is Phase.TERMINATED:
            raise SteppedTerminatedEpisode("reset the environment before stepping")

        st.step += 1
        self._gripper_state = apply_action(
            self.gripper, self._gripper_state, action, self.env_config.step_duration
        )
        fk = forward_kinematics(
            self.gripper, self.wrist_pose(self._gripper_state.wrist_offset), self._gripper_state
        )
        contacts = detect_contacts(self.obj, self.plane, fk, self.gripper.fingertip_radius)
        self._last_fk = fk
        self._last_contacts = contacts

        self._apply_object_push(contacts)

        plane_hit = any(
            info.plane_distance is not None and info.plane_distance < self.gripper.fingertip_radius
            for info in contacts.values()
        )

        world_contacts = self.actual_contacts_world()
        snapshots: list[FingerSnapshot] = []
        for tracker in st.trackers:
            body = fk[tracker.body]
            info = contacts[tracker.body]
            c, n = world_contacts[tracker.contact_index]
            outward = -n
            if tracker.contact_step is None and info.in_contact:
                tracker.contact_step = st.step
                tracker.hold_anchor = c + self.schedule.guide_offset(st.step) * outward
            snapshots.append(
                FingerSnapshot(
                    name=tracker.body,
                    position=body.position,
                    force_direction=body.force_direction,
                    in_contact=info.in_contact,
                    target_point=c,
                    target_direction=n,
                    guide_direction=outward,
                    contact_step=tracker.contact_step,
                    hold_anchor=tracker.hold_anchor,
                )
            )

        if any(t.contact_step is not None for t in st.trackers):
            st.steps_since_contact += 1

        ctx = StepContext(
            phase=st.phase,
            step=st.step,
            steps_since_contact=st.steps_since_contact,
            object_displacement=st.object_displacement,
            plane_collision=plane_hit,
            fingers=snapshots,
        )
        outcome = step_reward(ctx, self.reward_config, self.schedule)
        reward = outcome.reward
        events = list(outcome.events)
        st.phase = outcome.next_phase

        if st.phase is Phase.EVALUATE:
            passed = self._final_test(fk, contacts, snapshots, outcome.finger_direction_errors)
            extra, event = evaluation_reward(
                passed, self._grasp_type is GraspType.PASSIVE_FORM, self.reward_config
            )
            reward += extra
            events.append(event)
            st.phase = Phase.TERMINATED

        if st.phase is Phase.TERMINATED and st.outcome is None:
            for ev in events:
                if ev in _EVENT_OUTCOME:
                    st.outcome = _EVENT_OUTCOME[ev]
                    break

        st.accumulated_reward += reward
        done = st.phase is Phase.TERMINATED
        info = {
            "events": [e.value for e in events],
            "outcome": st.outcome,
            "object_displacement": st.object_displacement,
            "direction_errors": outcome.finger_direction_errors,
            "penalized": any(e in PENALTY_EVENTS for e in events),
        }
        return st, self._observation(), reward, done, info

    # ------------------------------------------------------------------
    def _final_test(self, fk, contacts, snapshots, dir_errors) -> bool:
        if self._grasp_type is GraspType.PASSIVE_FORM:
            tracker = self.state.trackers[0]
            c, n = self.actual_contacts_world()[tracker.contact_index]
            body = fk[tracker.body]
            return evaluate_form_closure(
                self.obj,
                self.plane,
                contacts[tracker.body],
                body.center,
                body.force_direction,
                n,
                self.reward_config.align_threshold,
                self.gripper.fingertip_radius,
            )
        infos = [contacts[t.body] for t in self.state.trackers]
        errors = [dir_errors[t.body] for t in self.state.trackers]
        return lift_test(infos, errors, self.lift_config, self.reward_config.align_threshold)

    # ------------------------------------------------------------------
    def _apply_object_push(self, contacts: dict[str, ContactInfo]) -> None:
        """Compliant quasi-static response: pads pressing past the dead zone
        displace the object along the inward normal and yaw it about the
        vertical axis through its center."""
        rho = self.gripper.fingertip_radius
        dead = self.env_config.push_dead_zone
        push = np.zeros(3)
        torque_z = 0.0
        center = self.state.object_pose.translation
        for info in contacts.values():
            if not info.in_contact or info.outward_normal is None:
                continue
            depth = max(0.0, (rho - dead) - info.surface_distance)
            if depth <= 0.0:
                continue
            f = -info.outward_normal * depth
            push += f
            arm = info.contact_point - center
            torque_z += arm[0] * f[1] - arm[1] * f[0]
        if np.linalg.norm(push) < 1e-15 and abs(torque_z) < 1e-15:
            return
        pose = self.state.object_pose
        new_translation = pose.translation + self.env_config.object_compliance * push
        yaw = self.env_config.rotation_compliance * torque_z
        new_rotation = quat_multiply(
            matrix_to_quat(rotation_about_z(yaw)), pose.rotation
        )
        self.state.object_pose = Pose(new_translation, new_rotation)
        self.obj.pose = self.state.object_pose

    # ------------------------------------------------------------------
    def _observation(self) -> np.ndarray:
        fk = self._last_fk
        contacts = self._last_contacts
        frame = self.recognized.frame
        parts = []
        bodies = _OBSERVED_BODIES[self._grasp_type]
        for name in bodies:
            parts.append(frame.inverse_point(fk[name].position))
        wrist_R = quat_to_matrix(self._wrist_quat)
        rel = quat_to_matrix(frame.rotation).T @ wrist_R
        parts.append(rotation_6d(rel))
        parts.append(np.array([self.approach.zenith, self.approach.azimuth]))
        parts.append(np.array([1.0 if contacts[name].in_contact else 0.0 for name in bodies]))
        if self.state.phase is Phase.APPROACH:
            parts.append(np.array([1.0, 0.0]))
        else:
            parts.append(np.array([0.0, 1.0]))
        return np.concatenate(parts)


# ----------------------------------------------------------------------
# Episode rollout helper
# ----------------------------------------------------------------------

@dataclass
class EpisodeResult:
    outcome: str
    steps: int
    total_reward: float
    penalized: bool
    records: list[dict] = field(default_factory=list)


def run_episode(
    env: GraspEnv,
    sample,
    policy: Callable[[np.ndarray], np.ndarray],
    max_steps: int = 500,
    collect_log: bool = False,
) -> EpisodeResult:
    """Drive one full episode with `policy`(obs) -> action."""
    try:
        state, obs = env.reset(sample)
    except InvalidSample:
        return EpisodeResult(Outcome.PLACEMENT_FAIL, 0, 0.0, True)

    records: list[dict] = []
    penalized = False
    for _ in range(max_steps):
        action = np.asarray(policy(obs), dtype=float)
        state, next_obs, reward, done, info = env.step(action)
        penalized = penalized or info["penalized"]
        if collect_log:
            records.append(
                {
                    "step": state.step,
                    "phase": state.phase.value,
                    "observation": obs.tolist(),
                    "action": action.tolist(),
                    "reward": reward,
                    "events": info["events"],
                }
            )
        obs = next_obs
        if done:
            break
    outcome = state.outcome or Outcome.TIMEOUT
    return EpisodeResult(outcome, state.step, state.accumulated_reward, penalized, records)
