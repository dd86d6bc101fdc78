"""Two-stage domain randomization and the curriculum switch.

Stage 1 randomizes the episode around a fixed canonical object: recognition
noise on the contact web (<= 5 mm translation, <= 1.5 deg rotation) and a
uniformly random approach direction on the placement sphere.  Stage 2 keeps
all of that and additionally randomizes the object shape (depth, width, and
the top-surface curvature exponent) across the configured ranges.

The curriculum switches 1 -> 2 (never back) once a full window of recent
episodes finished without any avoiding penalty.

Samplers are pure functions of (seed, index): the same pair always yields
the same sample, which is what replay logging and the deterministic sweep
harness rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .contact_web import (
    ApproachDirection,
    ContactWeb,
    GraspType,
    PlacementFailure,
    WebNoise,
    perturb_web,
    place_web,
)
from .geometry import EPS_EXPONENT_MIN, SuperquadricObject, SuperquadricParams
from .transforms import Pose

# Canonical stage-1 object: midpoint of the stage-2 ranges.
CANONICAL_DEPTH = 0.04   # meters, full depth (2 * a1)
CANONICAL_WIDTH = 0.08   # meters, full width (2 * a2)
CANONICAL_EPS2 = 1.0
OBJECT_HEIGHT = 0.08     # meters, full height (2 * a3), fixed for all runs

# The hook skill trains on a handle stand-in (thin vertical post) rather
# than the box: its grasp wraps a slender cross-section.
HANDLE_DEPTH = 0.02
HANDLE_WIDTH = 0.02


@dataclass(frozen=True)
class RandomizationConfig:
    grasp_type: GraspType = GraspType.ACTIVE_FORCE
    zenith_range: tuple[float, float] = (0.0, np.deg2rad(60.0))
    azimuth_range: tuple[float, float] = (-np.deg2rad(45.0), np.deg2rad(45.0))
    noise_enabled: bool = True
    # stage-2 shape ranges (full depth/width in meters, eps2 dimensionless)
    depth_range: tuple[float, float] = (0.02, 0.06)
    width_range: tuple[float, float] = (0.06, 0.10)
    eps2_range: tuple[float, float] = (EPS_EXPONENT_MIN, 2.0)
    curriculum_window: int = 200
    initial_stage: int = 1
    stage2_enabled: bool = True

    def validate(self) -> None:
        for name in ("zenith_range", "azimuth_range", "depth_range", "width_range", "eps2_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is empty: {lo} > {hi}")
        if not (0 <= self.zenith_range[0] and self.zenith_range[1] <= np.pi / 2 + 1e-12):
            raise ValueError("zenith_range must lie in [0, pi/2]")
        if self.curriculum_window < 1:
            raise ValueError("curriculum_window must be >= 1")
        if self.initial_stage not in (1, 2):
            raise ValueError("initial_stage must be 1 or 2")

    def to_dict(self) -> dict:
        return {
            "grasp_type": self.grasp_type.value,
            "zenith_range": list(self.zenith_range),
            "azimuth_range": list(self.azimuth_range),
            "noise_enabled": self.noise_enabled,
            "depth_range": list(self.depth_range),
            "width_range": list(self.width_range),
            "eps2_range": list(self.eps2_range),
            "curriculum_window": self.curriculum_window,
            "initial_stage": self.initial_stage,
            "stage2_enabled": self.stage2_enabled,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomizationConfig":
        return cls(
            grasp_type=GraspType(d["grasp_type"]),
            zenith_range=tuple(float(x) for x in d["zenith_range"]),
            azimuth_range=tuple(float(x) for x in d["azimuth_range"]),
            noise_enabled=bool(d["noise_enabled"]),
            depth_range=tuple(float(x) for x in d["depth_range"]),
            width_range=tuple(float(x) for x in d["width_range"]),
            eps2_range=tuple(float(x) for x in d["eps2_range"]),
            curriculum_window=int(d["curriculum_window"]),
            initial_stage=int(d.get("initial_stage", 1)),
            stage2_enabled=bool(d.get("stage2_enabled", True)),
        )


def canonical_params(cfg: RandomizationConfig | None = None) -> SuperquadricParams:
    if cfg is not None and cfg.grasp_type is GraspType.PASSIVE_FORM:
        depth, width = HANDLE_DEPTH, HANDLE_WIDTH
    else:
        depth, width = CANONICAL_DEPTH, CANONICAL_WIDTH
    return SuperquadricParams(
        a1=depth / 2.0,
        a2=width / 2.0,
        a3=OBJECT_HEIGHT / 2.0,
        eps1=EPS_EXPONENT_MIN,
        eps2=CANONICAL_EPS2,
    )


@dataclass
class RandomizationSample:
    object_params: SuperquadricParams
    object_pose: Pose
    actual_web: ContactWeb
    recognized_web: ContactWeb
    approach: ApproachDirection
    noise: WebNoise
    grasp_type: GraspType
    seed: int
    stage: int = 1

    def to_dict(self) -> dict:
        return {
            "object_params": self.object_params.to_dict(),
            "object_pose": self.object_pose.to_dict(),
            "actual_web": self.actual_web.to_dict(),
            "recognized_web": self.recognized_web.to_dict(),
            "approach": self.approach.to_dict(),
            "noise": self.noise.to_dict(),
            "grasp_type": self.grasp_type.value,
            "seed": self.seed,
            "stage": self.stage,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomizationSample":
        return cls(
            object_params=SuperquadricParams.from_dict(d["object_params"]),
            object_pose=Pose.from_dict(d["object_pose"]),
            actual_web=ContactWeb.from_dict(d["actual_web"]),
            recognized_web=ContactWeb.from_dict(d["recognized_web"]),
            approach=ApproachDirection.from_dict(d["approach"]),
            noise=WebNoise.from_dict(d["noise"]),
            grasp_type=GraspType(d["grasp_type"]),
            seed=int(d["seed"]),
            stage=int(d.get("stage", 1)),
        )


def sampler_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for sample `index` of run `seed`."""
    return np.random.default_rng([int(seed), int(index)])


def _build_sample(
    rng: np.random.Generator, cfg: RandomizationConfig, params: SuperquadricParams, stage: int
) -> RandomizationSample:
    pose = Pose.identity()
    obj = SuperquadricObject(params, pose)
    actual = place_web(obj, cfg.grasp_type)
    noise = WebNoise.sample(rng) if cfg.noise_enabled else WebNoise.zero()
    recognized = perturb_web(actual, noise)
    zenith = rng.uniform(*cfg.zenith_range)
    azimuth = rng.uniform(*cfg.azimuth_range)
    episode_seed = int(rng.integers(0, 2**31 - 1))
    return RandomizationSample(
        object_params=params,
        object_pose=pose,
        actual_web=actual,
        recognized_web=recognized,
        approach=ApproachDirection(zenith, azimuth),
        noise=noise,
        grasp_type=cfg.grasp_type,
        seed=episode_seed,
        stage=stage,
    )


def sample_stage1(rng: np.random.Generator, cfg: RandomizationConfig) -> RandomizationSample:
    """Pose noise + spherical hand placement on the canonical object."""
    return _build_sample(rng, cfg, canonical_params(cfg), stage=1)


def sample_stage2(rng: np.random.Generator, cfg: RandomizationConfig) -> RandomizationSample:
    """Stage-1 randomization plus uniform shape randomization."""
    depth = rng.uniform(*cfg.depth_range)
    width = rng.uniform(*cfg.width_range)
    eps2 = rng.uniform(*cfg.eps2_range)
    params = SuperquadricParams(
        a1=depth / 2.0, a2=width / 2.0, a3=OBJECT_HEIGHT / 2.0, eps1=EPS_EXPONENT_MIN, eps2=eps2
    )
    return _build_sample(rng, cfg, params, stage=2)


def draw_sample(cfg: RandomizationConfig, stage: int, seed: int, index: int) -> RandomizationSample:
    """Deterministic sample for (seed, index) at the given stage."""
    rng = sampler_rng(seed, index)
    if stage >= 2:
        return sample_stage2(rng, cfg)
    return sample_stage1(rng, cfg)


# ----------------------------------------------------------------------
# Curriculum
# ----------------------------------------------------------------------

@dataclass
class CurriculumState:
    stage: int = 1
    window: list[bool] = field(default_factory=list)  # True = penalty-free
    episode_count: int = 0

    def window_clean(self, width: int) -> bool:
        return len(self.window) >= width and all(self.window[-width:])


def update_curriculum(
    state: CurriculumState, penalized: bool, cfg: RandomizationConfig
) -> CurriculumState:
    """Record an episode outcome; switch to stage 2 after a clean window.

    Stages only ever move forward.
    """
    window = (state.window + [not penalized])[-cfg.curriculum_window :]
    new = CurriculumState(state.stage, window, state.episode_count + 1)
    if (
        new.stage == 1
        and cfg.stage2_enabled
        and new.window_clean(cfg.curriculum_window)
    ):
        new = replace(new, stage=2, window=[])
    return new
