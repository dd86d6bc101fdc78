"""Trainer-facing task adapters.

`ReachTask` is the plumbing sanity check: same 8-wide action interface as
the gripper, reward = minus the distance to a random target, trivially
solvable.  `GraspTask` wraps a GraspEnv plus the domain-randomization
sampler so each reset deterministically draws sample `episode_index` for
the current curriculum stage.
"""

from __future__ import annotations

import numpy as np

from .contact_web import PlacementFailure
from .env import GraspEnv, InvalidSample, Outcome
from .randomize import RandomizationConfig, draw_sample


class ReachTask:
    """Move a point to a target with the first three action channels."""

    obs_dim = 3
    action_dim = 8
    step_size = 0.05
    success_radius = 0.02
    max_steps = 60

    def __init__(self, seed: int):
        self.seed = seed
        self.pos = np.zeros(3)
        self.target = np.zeros(3)
        self.t = 0

    def reset(self, episode_index: int, stage: int = 1) -> np.ndarray:
        rng = np.random.default_rng([self.seed, episode_index])
        self.pos = np.zeros(3)
        self.target = rng.uniform(-0.5, 0.5, size=3)
        self.t = 0
        return self.target - self.pos

    def step(self, action: np.ndarray):
        self.t += 1
        a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        self.pos = self.pos + self.step_size * a[:3]
        dist = float(np.linalg.norm(self.target - self.pos))
        reward = -dist
        success = dist < self.success_radius
        done = success or self.t >= self.max_steps
        info = {"outcome": Outcome.SUCCESS if success else Outcome.TIMEOUT, "penalized": False}
        return self.target - self.pos, reward, done, info


class GraspTask:
    """One grasp environment plus its deterministic sample stream."""

    def __init__(
        self,
        env: GraspEnv,
        rand_cfg: RandomizationConfig,
        sample_seed: int,
        max_episode_steps: int = 400,
    ):
        from .env import observation_dim

        self.env = env
        self.rand_cfg = rand_cfg
        self.sample_seed = sample_seed
        self.max_episode_steps = max_episode_steps
        self.obs_dim = observation_dim(rand_cfg.grasp_type)
        self.action_dim = env.action_dim()
        self._steps = 0

    def reset(self, episode_index: int, stage: int = 1) -> np.ndarray:
        # A start pose can, in principle, penetrate an extreme sampled shape;
        # skip such samples deterministically by sub-indexing.
        for attempt in range(16):
            sample = draw_sample(
                self.rand_cfg, stage, self.sample_seed, episode_index * 16 + attempt
            )
            try:
                _, obs = self.env.reset(sample)
                self._steps = 0
                return obs
            except (InvalidSample, PlacementFailure):
                continue
        raise InvalidSample(f"no valid sample near episode index {episode_index}")

    def step(self, action: np.ndarray):
        self._steps += 1
        state, obs, reward, done, info = self.env.step(action)
        if not done and self._steps >= self.max_episode_steps:
            done = True
            info = dict(info, outcome=info.get("outcome") or Outcome.TIMEOUT)
        return obs, reward, done, info
