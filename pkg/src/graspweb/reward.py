"""Grasp reward terms, guidance schedule, and per-step aggregation.

The task is split into an approach phase (drive each finger contact toward
its desired contact point along a guiding line) and a contact-to-grasp
phase (hold position, rotate the contact force direction onto the desired
one).  Rewards are logs of "baseline minus distance" so they stay bounded
and strictly favor progress; penalties mark inappropriate states, and the
aborting ones terminate the episode.

Distances, per finger:

  guide_distance : max(|p - (c + k_t * n)| - delta_t, 0), distance to a
                   moving guiding point k_t out along the approach line
                   through the contact (zero inside the tolerance ball)
  direction_error: arccos(f . n), angle between the finger's producible
                   force direction and the desired one

The per-step aggregation also owns every phase transition, so the episode
machine in the environment is driven entirely by reward events.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

# Log arguments are clamped to at least this value: the raw formulas are
# undefined once a distance exceeds its baseline, and the clamp preserves
# ordering while keeping values finite.
LOG_FLOOR = 1e-4


class NonUnitInput(Exception):
    pass


class Phase(enum.Enum):
    APPROACH = "approach"
    CONTACT_TO_GRASP = "contact_to_grasp"
    EVALUATE = "evaluate"
    TERMINATED = "terminated"


PHASE_ORDER = {
    Phase.APPROACH: 0,
    Phase.CONTACT_TO_GRASP: 1,
    Phase.EVALUATE: 2,
    Phase.TERMINATED: 3,
}


class Event(enum.Enum):
    CONTACT_PHASE_ENTERED = "contact_phase_entered"
    CONVERGED = "converged"
    DRIFT_PENALTY = "drift_penalty"
    APPROACH_TIMEOUT = "approach_timeout"
    CONTACT_TIMEOUT = "contact_timeout"
    LOST_CONTACT = "lost_contact"
    OBJECT_MOVED = "object_moved"
    PLANE_COLLISION = "plane_collision"
    LIFT_PASSED = "lift_passed"
    LIFT_FAILED = "lift_failed"
    FORM_PASSED = "form_passed"
    FORM_FAILED = "form_failed"


# Events that mark an episode as "penalized" for curriculum purposes.
PENALTY_EVENTS = {
    Event.DRIFT_PENALTY,
    Event.APPROACH_TIMEOUT,
    Event.CONTACT_TIMEOUT,
    Event.LOST_CONTACT,
    Event.OBJECT_MOVED,
    Event.PLANE_COLLISION,
    Event.LIFT_FAILED,
    Event.FORM_FAILED,
}


@dataclass(frozen=True)
class GuidanceSchedule:
    """Guiding-point distance k_t and tolerance delta_t over the approach.

    k_t decays linearly from `guide_start` to zero across `decay_steps`
    control steps and stays zero after; the approach tolerance is constant.
    `hold_tolerance` is the post-contact deviation budget.
    """

    guide_start: float = 0.05
    decay_steps: int = 60
    approach_tolerance: float = 0.01
    hold_tolerance: float = 0.01

    def __post_init__(self):
        if self.guide_start < 0 or self.decay_steps < 1:
            raise ValueError("guide_start must be >= 0 and decay_steps >= 1")
        if self.approach_tolerance <= 0 or self.hold_tolerance <= 0:
            raise ValueError("tolerances must be positive")

    def guide_offset(self, step: int) -> float:
        """k_t in meters; non-increasing, zero after the decay window."""
        return self.guide_start * max(0.0, 1.0 - step / self.decay_steps)

    def tolerance(self, step: int) -> float:
        """delta_t in meters (constant during approach)."""
        return self.approach_tolerance


@dataclass(frozen=True)
class RewardConfig:
    position_baseline: float = 1.2     # meters; upper bound on guide distances
    direction_baseline: float = 3.5    # radians; must exceed pi
    drift_penalty: float = 5.0         # lost the hold tolerance after contact
    abort_penalty: float = 10.0        # terminating violations
    resist_penalty: float = 2.0        # failed the external-force resistance test
    align_threshold: float = 0.3       # radians; convergence for direction errors
    max_approach_steps: int = 100
    max_contact_steps: int = 40
    object_motion_limit: float = 0.02  # meters of object translation
    success_reward: float = 100.0      # terminal reward when the grasp holds

    def validate(self) -> None:
        if not (self.abort_penalty > self.drift_penalty > self.resist_penalty > 0):
            raise ValueError(
                "penalty ordering must satisfy abort > drift > resist > 0, got "
                f"{self.abort_penalty}, {self.drift_penalty}, {self.resist_penalty}"
            )
        if self.direction_baseline <= np.pi:
            raise ValueError("direction_baseline must exceed pi")
        if self.position_baseline <= 0:
            raise ValueError("position_baseline must be positive")
        if self.align_threshold <= 0:
            raise ValueError("align_threshold must be positive")
        if self.max_approach_steps < 1 or self.max_contact_steps < 1:
            raise ValueError("step limits must be >= 1")
        if self.object_motion_limit <= 0:
            raise ValueError("object_motion_limit must be positive")


# ----------------------------------------------------------------------
# Distance metrics
# ----------------------------------------------------------------------

def guide_distance(p, contact_point, guide_direction, step: int, schedule: GuidanceSchedule) -> float:
    """Distance from p to the guiding point, less the tolerance ball.

    The guiding point sits `k_t` along `guide_direction` from the contact;
    callers pass the outward approach direction so the funnel lies outside
    the object.
    """
    p = np.asarray(p, dtype=float)
    guide = np.asarray(contact_point, dtype=float) + schedule.guide_offset(step) * np.asarray(
        guide_direction, dtype=float
    )
    return max(float(np.linalg.norm(p - guide)) - schedule.tolerance(step), 0.0)


def direction_error(f, n) -> float:
    """Angle in [0, pi] between unit vectors f and n."""
    f = np.asarray(f, dtype=float)
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(f) - 1.0) > 1e-6 or abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise NonUnitInput("direction_error expects unit vectors")
    return float(np.arccos(np.clip(np.dot(f, n), -1.0, 1.0)))


def _clamped_log(baseline: float, distance: float) -> float:
    return float(np.log(max(baseline - distance, LOG_FLOOR)))


def approach_reward(distance: float, config: RewardConfig) -> float:
    """log(baseline - distance), clamped; strictly decreasing in distance."""
    return _clamped_log(config.position_baseline, distance)


def contact_reward(
    dir_error: float, hold_distance: float, config: RewardConfig, schedule: GuidanceSchedule
) -> float:
    """Post-contact reward: alignment plus hold terms while the finger stays
    within the hold tolerance of its contact-time guiding point, otherwise
    the drift penalty."""
    if hold_distance < schedule.hold_tolerance:
        return _clamped_log(config.direction_baseline, dir_error) + _clamped_log(
            config.position_baseline, hold_distance
        )
    return -config.drift_penalty


# ----------------------------------------------------------------------
# Per-step aggregation
# ----------------------------------------------------------------------

@dataclass
class FingerSnapshot:
    """Everything the reward needs about one assigned finger this step."""

    name: str
    position: np.ndarray              # current contact position p_i (pad point)
    force_direction: np.ndarray       # current producible force direction f_i
    in_contact: bool
    target_point: np.ndarray          # desired contact c_i (actual web, current)
    target_direction: np.ndarray      # desired force direction n_i (inward)
    guide_direction: np.ndarray       # outward approach-line direction (-n_i)
    contact_step: int | None = None   # T, set once the finger first touches
    hold_anchor: np.ndarray | None = None  # guiding point frozen at T


@dataclass
class StepContext:
    phase: Phase
    step: int
    steps_since_contact: int
    object_displacement: float
    plane_collision: bool
    fingers: list[FingerSnapshot]


@dataclass
class StepOutcome:
    reward: float
    events: list[Event]
    next_phase: Phase
    finger_direction_errors: dict[str, float] = field(default_factory=dict)


def step_reward(ctx: StepContext, config: RewardConfig, schedule: GuidanceSchedule) -> StepOutcome:
    """Sum per-finger phase rewards and resolve penalties/transitions.

    Violation checks run in a fixed priority order (plane collision, object
    motion, lost contact, timeouts) so traces are reproducible; any of them
    terminates the episode with the abort penalty.
    """
    if ctx.phase in (Phase.EVALUATE, Phase.TERMINATED):
        raise ValueError(f"step_reward called in phase {ctx.phase}")

    reward = 0.0
    events: list[Event] = []
    dir_errors: dict[str, float] = {}

    for fg in ctx.fingers:
        if fg.contact_step is None:
            d = guide_distance(fg.position, fg.target_point, fg.guide_direction, ctx.step, schedule)
            reward += approach_reward(d, config)
        else:
            d_f = direction_error(fg.force_direction, fg.target_direction)
            dir_errors[fg.name] = d_f
            hold = max(
                float(np.linalg.norm(np.asarray(fg.position) - fg.hold_anchor))
                - schedule.tolerance(fg.contact_step),
                0.0,
            )
            r = contact_reward(d_f, hold, config, schedule)
            if r == -config.drift_penalty:
                events.append(Event.DRIFT_PENALTY)
            reward += r

    # Terminating violations, in priority order.
    if ctx.plane_collision:
        events.append(Event.PLANE_COLLISION)
        return StepOutcome(reward - config.abort_penalty, events, Phase.TERMINATED, dir_errors)
    if ctx.object_displacement > config.object_motion_limit:
        events.append(Event.OBJECT_MOVED)
        return StepOutcome(reward - config.abort_penalty, events, Phase.TERMINATED, dir_errors)

    contacted = [fg for fg in ctx.fingers if fg.contact_step is not None]
    if ctx.phase is Phase.CONTACT_TO_GRASP or contacted:
        if any(not fg.in_contact for fg in contacted):
            events.append(Event.LOST_CONTACT)
            return StepOutcome(reward - config.abort_penalty, events, Phase.TERMINATED, dir_errors)

    next_phase = ctx.phase
    if ctx.phase is Phase.APPROACH:
        if contacted:
            events.append(Event.CONTACT_PHASE_ENTERED)
            next_phase = Phase.CONTACT_TO_GRASP
        elif ctx.step > config.max_approach_steps:
            events.append(Event.APPROACH_TIMEOUT)
            return StepOutcome(reward - config.abort_penalty, events, Phase.TERMINATED, dir_errors)

    if next_phase is Phase.CONTACT_TO_GRASP:
        all_contacted = len(contacted) == len(ctx.fingers)
        if all_contacted and all(
            dir_errors[fg.name] < config.align_threshold for fg in ctx.fingers
        ):
            events.append(Event.CONVERGED)
            next_phase = Phase.EVALUATE
        elif ctx.phase is Phase.CONTACT_TO_GRASP and ctx.steps_since_contact > config.max_contact_steps:
            events.append(Event.CONTACT_TIMEOUT)
            return StepOutcome(reward - config.abort_penalty, events, Phase.TERMINATED, dir_errors)

    return StepOutcome(reward, events, next_phase, dir_errors)


def evaluation_reward(passed: bool, form_closure: bool, config: RewardConfig) -> tuple[float, Event]:
    """Terminal reward once the grasp reaches evaluation: the resistance (or
    hook) test either passes, or costs the resist penalty."""
    if passed:
        return config.success_reward, Event.FORM_PASSED if form_closure else Event.LIFT_PASSED
    return -config.resist_penalty, Event.FORM_FAILED if form_closure else Event.LIFT_FAILED
