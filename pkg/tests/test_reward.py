import numpy as np
import pytest

from graspweb.reward import (
    Event,
    FingerSnapshot,
    GuidanceSchedule,
    LOG_FLOOR,
    NonUnitInput,
    Phase,
    RewardConfig,
    StepContext,
    approach_reward,
    contact_reward,
    direction_error,
    evaluation_reward,
    guide_distance,
    step_reward,
)

CFG = RewardConfig()
SCHED = GuidanceSchedule()


# ----------------------------------------------------------------------
# Distance metrics
# ----------------------------------------------------------------------

def test_guide_distance_at_guiding_point():
    c = np.array([0.0, 0.04, 0.02])
    n = np.array([0.0, 1.0, 0.0])
    t = 10
    p = c + SCHED.guide_offset(t) * n
    assert guide_distance(p, c, n, t, SCHED) == 0.0


def test_guide_distance_boundary_and_linear():
    c = np.zeros(3)
    n = np.array([0.0, 0.0, 1.0])
    t = SCHED.decay_steps + 5  # k_t = 0
    delta = SCHED.tolerance(t)
    on_boundary = c + np.array([delta, 0, 0])
    assert guide_distance(on_boundary, c, n, t, SCHED) == 0.0
    outside = c + np.array([delta + 0.01, 0, 0])
    assert guide_distance(outside, c, n, t, SCHED) == pytest.approx(0.01)


def test_guide_offset_schedule():
    assert SCHED.guide_offset(0) == SCHED.guide_start
    ks = [SCHED.guide_offset(t) for t in range(0, 200)]
    assert all(a >= b for a, b in zip(ks, ks[1:]))  # non-increasing
    assert SCHED.guide_offset(SCHED.decay_steps) == 0.0
    assert SCHED.guide_offset(SCHED.decay_steps + 50) == 0.0


def test_direction_error_cardinal_cases():
    n = np.array([0.0, 0.0, 1.0])
    assert direction_error(n, n) == 0.0
    assert direction_error(-n, n) == pytest.approx(np.pi)
    assert direction_error(np.array([1.0, 0, 0]), n) == pytest.approx(np.pi / 2)


def test_direction_error_rejects_non_unit():
    with pytest.raises(NonUnitInput):
        direction_error(np.array([1.1, 0, 0]), np.array([1.0, 0, 0]))


def test_direction_error_clamps_dot():
    # numerically slightly-over-unit dot products must not produce NaN
    n = np.array([1.0, 0.0, 0.0])
    f = np.array([1.0 + 5e-7, 0.0, 0.0])
    assert direction_error(f / np.linalg.norm(f), n) == 0.0


# ----------------------------------------------------------------------
# Phase rewards
# ----------------------------------------------------------------------

def test_approach_reward_values():
    assert approach_reward(0.0, CFG) == pytest.approx(np.log(CFG.position_baseline))
    assert approach_reward(CFG.position_baseline - 1.0, CFG) == pytest.approx(0.0)
    assert approach_reward(CFG.position_baseline, CFG) == pytest.approx(np.log(LOG_FLOOR))
    assert approach_reward(CFG.position_baseline + 5.0, CFG) == pytest.approx(np.log(LOG_FLOOR))


def test_approach_reward_monotone():
    grid = np.linspace(0.0, CFG.position_baseline * 1.2, 200)
    vals = [approach_reward(d, CFG) for d in grid]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_contact_reward_values():
    r = contact_reward(0.0, 0.0, CFG, SCHED)
    assert r == pytest.approx(np.log(CFG.direction_baseline) + np.log(CFG.position_baseline))
    # drift branch
    assert contact_reward(0.0, SCHED.hold_tolerance + 0.001, CFG, SCHED) == -CFG.drift_penalty
    assert contact_reward(0.0, SCHED.hold_tolerance, CFG, SCHED) == -CFG.drift_penalty
    # log(1) first term
    r = contact_reward(CFG.direction_baseline - 1.0, 0.0, CFG, SCHED)
    assert r == pytest.approx(np.log(CFG.position_baseline))


def test_config_ordering_validated():
    with pytest.raises(ValueError):
        RewardConfig(drift_penalty=1.0, abort_penalty=10.0, resist_penalty=2.0).validate()
    with pytest.raises(ValueError):
        RewardConfig(direction_baseline=3.0).validate()  # must exceed pi
    RewardConfig().validate()


# ----------------------------------------------------------------------
# step_reward aggregation
# ----------------------------------------------------------------------

def finger(name="bind", contacted=False, t=5, d_f=0.0, hold_err=0.0, in_contact=None):
    c = np.array([0.0, 0.04, 0.02])
    n = np.array([0.0, -1.0, 0.0])
    out = -n
    if contacted:
        anchor = c + SCHED.guide_offset(t) * out
        # position offset producing the requested hold error
        p = anchor + np.array([SCHED.tolerance(t) + hold_err, 0, 0]) if hold_err > 0 else anchor
        f = np.array([np.sin(d_f), -np.cos(d_f), 0.0])
        return FingerSnapshot(name, p, f, in_contact if in_contact is not None else True,
                              c, n, out, contact_step=t, hold_anchor=anchor)
    p = c + SCHED.guide_offset(t) * out  # at the guiding point
    return FingerSnapshot(name, p, np.array([0.0, -1.0, 0.0]),
                          in_contact if in_contact is not None else False, c, n, out)


def ctx(phase=Phase.APPROACH, step=5, fingers=None, since_contact=0,
        displacement=0.0, plane=False):
    return StepContext(phase, step, since_contact, displacement, plane,
                       fingers if fingers is not None else [finger(), finger("thumb")])


def test_all_fingers_at_guides():
    out = step_reward(ctx(), CFG, SCHED)
    assert out.reward == pytest.approx(2 * np.log(CFG.position_baseline))
    assert out.events == []
    assert out.next_phase is Phase.APPROACH


def test_approach_timeout():
    out = step_reward(ctx(step=CFG.max_approach_steps + 1), CFG, SCHED)
    assert Event.APPROACH_TIMEOUT in out.events
    assert out.next_phase is Phase.TERMINATED
    assert out.reward == pytest.approx(2 * np.log(CFG.position_baseline) - CFG.abort_penalty)
    # at exactly the limit the episode survives
    out = step_reward(ctx(step=CFG.max_approach_steps), CFG, SCHED)
    assert Event.APPROACH_TIMEOUT not in out.events


def test_contact_entered():
    fingers = [finger(contacted=True), finger("thumb")]
    out = step_reward(ctx(fingers=fingers), CFG, SCHED)
    assert Event.CONTACT_PHASE_ENTERED in out.events
    assert out.next_phase is Phase.CONTACT_TO_GRASP


def test_mixed_phase_rewards_per_finger():
    fingers = [finger(contacted=True, d_f=0.1), finger("thumb")]
    out = step_reward(ctx(fingers=fingers), CFG, SCHED)
    expected = (
        np.log(CFG.direction_baseline - 0.1) + np.log(CFG.position_baseline)
        + np.log(CFG.position_baseline)
    )
    assert out.reward == pytest.approx(expected)


def test_lost_contact_aborts():
    fingers = [finger(contacted=True, in_contact=False), finger("thumb", contacted=True)]
    out = step_reward(ctx(phase=Phase.CONTACT_TO_GRASP, fingers=fingers, since_contact=3),
                      CFG, SCHED)
    assert Event.LOST_CONTACT in out.events
    assert out.next_phase is Phase.TERMINATED


def test_object_motion_aborts():
    out = step_reward(ctx(displacement=CFG.object_motion_limit + 1e-4), CFG, SCHED)
    assert Event.OBJECT_MOVED in out.events
    assert out.next_phase is Phase.TERMINATED


def test_plane_collision_aborts():
    out = step_reward(ctx(plane=True), CFG, SCHED)
    assert Event.PLANE_COLLISION in out.events
    assert out.next_phase is Phase.TERMINATED


def test_drift_penalty_does_not_terminate():
    fingers = [finger(contacted=True, hold_err=0.005), finger("thumb", contacted=True)]
    out = step_reward(ctx(phase=Phase.CONTACT_TO_GRASP, fingers=fingers, since_contact=2),
                      CFG, SCHED)
    assert Event.DRIFT_PENALTY in out.events
    assert out.next_phase is not Phase.TERMINATED


def test_convergence_requires_all_fingers():
    below = CFG.align_threshold - 0.05
    above = CFG.align_threshold + 0.05
    fingers = [finger(contacted=True, d_f=below), finger("thumb", contacted=True, d_f=above)]
    out = step_reward(ctx(phase=Phase.CONTACT_TO_GRASP, fingers=fingers, since_contact=2),
                      CFG, SCHED)
    assert out.next_phase is Phase.CONTACT_TO_GRASP
    fingers = [finger(contacted=True, d_f=below), finger("thumb", contacted=True, d_f=below)]
    out = step_reward(ctx(phase=Phase.CONTACT_TO_GRASP, fingers=fingers, since_contact=2),
                      CFG, SCHED)
    assert Event.CONVERGED in out.events
    assert out.next_phase is Phase.EVALUATE


def test_contact_timeout():
    fingers = [finger(contacted=True), finger("thumb")]  # thumb never contacts
    out = step_reward(
        ctx(phase=Phase.CONTACT_TO_GRASP, fingers=fingers,
            since_contact=CFG.max_contact_steps + 1),
        CFG, SCHED,
    )
    assert Event.CONTACT_TIMEOUT in out.events
    assert out.next_phase is Phase.TERMINATED


def test_step_reward_rejects_terminal_phase():
    with pytest.raises(ValueError):
        step_reward(ctx(phase=Phase.TERMINATED), CFG, SCHED)


def test_step_reward_always_finite():
    rng = np.random.default_rng(50)
    for _ in range(300):
        contacted = rng.random() < 0.5
        fingers = [
            finger(contacted=contacted, t=int(rng.integers(1, 90)),
                   d_f=rng.uniform(0, np.pi), hold_err=rng.uniform(0, 0.5)),
            finger("thumb"),
        ]
        phase = Phase.CONTACT_TO_GRASP if contacted else Phase.APPROACH
        out = step_reward(
            ctx(phase=phase, step=int(rng.integers(1, 90)), fingers=fingers,
                since_contact=int(rng.integers(0, 30)),
                displacement=rng.uniform(0, 0.019)),
            CFG, SCHED,
        )
        assert np.isfinite(out.reward)


def test_evaluation_reward():
    r, ev = evaluation_reward(True, False, CFG)
    assert r == CFG.success_reward and ev is Event.LIFT_PASSED
    r, ev = evaluation_reward(False, False, CFG)
    assert r == -CFG.resist_penalty and ev is Event.LIFT_FAILED
    r, ev = evaluation_reward(True, True, CFG)
    assert ev is Event.FORM_PASSED
    r, ev = evaluation_reward(False, True, CFG)
    assert ev is Event.FORM_FAILED
