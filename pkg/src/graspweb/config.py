"""Run configuration: one YAML file holding every tunable constant.

Sections map one-to-one onto the component configs (gripper model, reward
constants, guidance schedule, environment, lift test, randomization ranges,
trainer hyperparameters) plus the grasp type and master seed.  Loading
validates invariants (penalty ordering, non-empty ranges, positive
durations) and rejects unknown keys; individual values can be overridden
with "section.key=value" strings.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import yaml

from .contact_web import GraspType
from .env import EnvConfig, GraspEnv, LiftTestConfig
from .gripper import GripperModel
from .randomize import RandomizationConfig
from .reward import GuidanceSchedule, RewardConfig
from .ppo import TrainerConfig


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    grasp_type: GraspType
    seed: int
    gripper: GripperModel
    reward: RewardConfig
    schedule: GuidanceSchedule
    environment: EnvConfig
    lift: LiftTestConfig
    randomization: RandomizationConfig
    trainer: TrainerConfig

    def validate(self) -> None:
        self.reward.validate()
        self.randomization.validate()
        self.trainer.validate()
        if self.environment.step_duration <= 0:
            raise ConfigError("environment.step_duration must be positive")
        if self.environment.approach_radius <= 0:
            raise ConfigError("environment.approach_radius must be positive")

    def to_dict(self) -> dict:
        return {
            "grasp_type": self.grasp_type.value,
            "seed": self.seed,
            "gripper": self.gripper.to_dict(),
            "reward": _reward_dict(self.reward),
            "schedule": _schedule_dict(self.schedule),
            "environment": self.environment.to_dict(),
            "lift": self.lift.to_dict(),
            "randomization": self.randomization.to_dict(),
            "trainer": self.trainer.to_dict(),
        }

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()[:16]

    def build_env(self) -> GraspEnv:
        return GraspEnv(
            gripper=self.gripper,
            reward_config=self.reward,
            schedule=self.schedule,
            env_config=self.environment,
            lift_config=self.lift,
        )


def _reward_dict(r: RewardConfig) -> dict:
    return {
        "position_baseline": r.position_baseline,
        "direction_baseline": r.direction_baseline,
        "drift_penalty": r.drift_penalty,
        "abort_penalty": r.abort_penalty,
        "resist_penalty": r.resist_penalty,
        "align_threshold": r.align_threshold,
        "max_approach_steps": r.max_approach_steps,
        "max_contact_steps": r.max_contact_steps,
        "object_motion_limit": r.object_motion_limit,
        "success_reward": r.success_reward,
    }


def _schedule_dict(s: GuidanceSchedule) -> dict:
    return {
        "guide_start": s.guide_start,
        "decay_steps": s.decay_steps,
        "approach_tolerance": s.approach_tolerance,
        "hold_tolerance": s.hold_tolerance,
    }


def default_config(grasp_type: GraspType = GraspType.ACTIVE_FORCE, seed: int = 0) -> RunConfig:
    return RunConfig(
        grasp_type=grasp_type,
        seed=seed,
        gripper=GripperModel.default(),
        reward=RewardConfig(),
        schedule=GuidanceSchedule(),
        environment=EnvConfig(),
        lift=LiftTestConfig(),
        randomization=RandomizationConfig(grasp_type=grasp_type),
        trainer=TrainerConfig(),
    )


def _check_keys(section: str, given: dict, allowed: set) -> None:
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {sorted(unknown)}")


def config_from_dict(data: dict) -> RunConfig:
    _check_keys(
        "config",
        data,
        {"grasp_type", "seed", "gripper", "reward", "schedule", "environment", "lift",
         "randomization", "trainer"},
    )
    base = default_config()
    try:
        grasp_type = GraspType(data.get("grasp_type", base.grasp_type.value))
    except ValueError as exc:
        raise ConfigError(f"invalid grasp_type: {data.get('grasp_type')}") from exc

    def section(name, defaults: dict) -> dict:
        given = data.get(name, {}) or {}
        if not isinstance(given, dict):
            raise ConfigError(f"section {name} must be a mapping")
        _check_keys(name, given, set(defaults))
        merged = dict(defaults)
        merged.update(given)
        return merged

    try:
        reward = RewardConfig(**section("reward", _reward_dict(base.reward)))
        schedule_d = section("schedule", _schedule_dict(base.schedule))
        schedule = GuidanceSchedule(
            guide_start=float(schedule_d["guide_start"]),
            decay_steps=int(schedule_d["decay_steps"]),
            approach_tolerance=float(schedule_d["approach_tolerance"]),
            hold_tolerance=float(schedule_d["hold_tolerance"]),
        )
        environment = EnvConfig.from_dict(section("environment", base.environment.to_dict()))
        lift = LiftTestConfig.from_dict(section("lift", base.lift.to_dict()))
        rand_d = section("randomization", base.randomization.to_dict())
        rand_d["grasp_type"] = grasp_type.value
        randomization = RandomizationConfig.from_dict(rand_d)
        trainer = TrainerConfig.from_dict(section("trainer", base.trainer.to_dict()))
        gripper_d = data.get("gripper")
        gripper = GripperModel.from_dict(gripper_d) if gripper_d else GripperModel.default()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    rc = RunConfig(
        grasp_type=grasp_type,
        seed=int(data.get("seed", 0)),
        gripper=gripper,
        reward=reward,
        schedule=schedule,
        environment=environment,
        lift=lift,
        randomization=randomization,
        trainer=trainer,
    )
    try:
        rc.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return rc


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply "section.key=value" strings onto a raw config dict."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key_path, raw_value = item.split("=", 1)
        parts = key_path.split(".")
        try:
            value = yaml.safe_load(raw_value)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {raw_value!r}") from exc
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key_path!r} crosses a non-section")
        node[parts[-1]] = value
    return data


def load_config(path: str, overrides: list[str] | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if overrides:
        data = apply_overrides(data, list(overrides))
    return config_from_dict(data)


TEMPLATE = """\
# graspweb run configuration (SI units: meters, radians, seconds, kg)

# Which grasp skill this run trains/evaluates:
#   active_force  - two-fingertip pinch (2 contacts)
#   passive_force - pinch plus palm press (3 contacts)
#   passive_form  - hook behind a handle (1 contact)
grasp_type: {grasp_type}
seed: {seed}

reward:
  position_baseline: {r[position_baseline]}   # upper bound on guide distances (log baseline)
  direction_baseline: {r[direction_baseline]} # > pi; log baseline for direction errors
  drift_penalty: {r[drift_penalty]}           # per-step penalty for leaving the hold tolerance
  abort_penalty: {r[abort_penalty]}           # terminating violations (must exceed drift_penalty)
  resist_penalty: {r[resist_penalty]}         # failed lift/hook test (must be below drift_penalty)
  align_threshold: {r[align_threshold]}       # rad; contact directions converged below this
  max_approach_steps: {r[max_approach_steps]} # phase must switch within this many steps
  max_contact_steps: {r[max_contact_steps]}   # contact phase must converge within this many steps
  object_motion_limit: {r[object_motion_limit]} # m of object translation before aborting
  success_reward: {r[success_reward]}         # terminal payout for a held grasp

schedule:
  guide_start: {s[guide_start]}           # m; initial guiding-point offset along the approach line
  decay_steps: {s[decay_steps]}           # steps to shrink the offset to zero
  approach_tolerance: {s[approach_tolerance]} # m; "close enough" ball around the guiding point
  hold_tolerance: {s[hold_tolerance]}     # m; post-contact deviation budget

environment:
  step_duration: {e[step_duration]}       # s per control step
  approach_radius: {e[approach_radius]}   # m; wrist start distance from the web center
  object_compliance: {e[object_compliance]}
  rotation_compliance: {e[rotation_compliance]}
  push_dead_zone: {e[push_dead_zone]}
  plane_clearance: {e[plane_clearance]}   # m; hook-training gap between plane and object

lift:
  object_mass: {l[object_mass]}           # kg; external force defaults to gravity on this mass
  friction: {l[friction]}
  external_force: null                    # override as [fx, fy, fz] in newtons
  hold_duration: {l[hold_duration]}
  displacement_tolerance: {l[displacement_tolerance]}
  cone_facets: {l[cone_facets]}
  gravity: {l[gravity]}

randomization:
  grasp_type: {grasp_type}
  zenith_range: [{z0}, {z1}]              # rad; approach zenith sampling range
  azimuth_range: [{a0}, {a1}]             # rad
  noise_enabled: true                     # recognition noise: <= 5 mm translation, <= 1.5 deg rotation
  depth_range: [0.02, 0.06]               # m; stage-2 full depth range
  width_range: [0.06, 0.10]               # m; stage-2 full width range
  eps2_range: [0.05, 2.0]                 # top-curvature exponent range (0.05 = sharp box)
  curriculum_window: {w}                  # penalty-free episodes required to enter stage 2
  initial_stage: 1
  stage2_enabled: true

trainer:
  learning_rate: {t[learning_rate]}
  clip_ratio: {t[clip_ratio]}
  discount: {t[discount]}
  gae_lambda: {t[gae_lambda]}
  epochs: {t[epochs]}
  minibatch_size: {t[minibatch_size]}
  horizon: {t[horizon]}                   # rollout steps per worker per update
  entropy_coef: {t[entropy_coef]}
  value_coef: {t[value_coef]}
  max_grad_norm: {t[max_grad_norm]}
  workers: {t[workers]}
  total_steps: {t[total_steps]}
  hidden: [128, 128]
  checkpoint_interval: {t[checkpoint_interval]}
  seed: {t[seed]}
"""


def template_yaml(grasp_type: GraspType = GraspType.ACTIVE_FORCE, seed: int = 0) -> str:
    rc = default_config(grasp_type, seed)
    return TEMPLATE.format(
        grasp_type=grasp_type.value,
        seed=seed,
        r=_reward_dict(rc.reward),
        s=_schedule_dict(rc.schedule),
        e=rc.environment.to_dict(),
        l=rc.lift.to_dict(),
        t=rc.trainer.to_dict(),
        z0=rc.randomization.zenith_range[0],
        z1=round(rc.randomization.zenith_range[1], 6),
        a0=round(rc.randomization.azimuth_range[0], 6),
        a1=round(rc.randomization.azimuth_range[1], 6),
        w=rc.randomization.curriculum_window,
    )
