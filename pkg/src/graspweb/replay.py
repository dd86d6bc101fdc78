"""Trajectory logs and the determinism audit.

An episode log is line-delimited JSON: a header record carrying the full
randomization sample (enough to rebuild the episode exactly) followed by one
record per control step.  JSON float serialization round-trips bit-exactly
in Python, so replaying the logged actions through a fresh environment and
comparing observations/rewards with `==` is a true bitwise audit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .env import GraspEnv, SteppedTerminatedEpisode
from .randomize import RandomizationSample

LOG_VERSION = 1


class CorruptLog(Exception):
    pass


def write_episode_log(path: str, sample: RandomizationSample, records: list[dict],
                      config_hash: str = "") -> None:
    with open(path, "w") as fh:
        header = {
            "kind": "header",
            "log_version": LOG_VERSION,
            "config_hash": config_hash,
            "sample": sample.to_dict(),
        }
        fh.write(json.dumps(header) + "\n")
        for rec in records:
            fh.write(json.dumps(dict(rec, kind="step")) + "\n")


def read_episode_log(path: str) -> tuple[RandomizationSample, list[dict], dict]:
    try:
        with open(path) as fh:
            lines = [line for line in fh if line.strip()]
    except OSError as exc:
        raise CorruptLog(f"cannot read log {path}: {exc}") from exc
    if not lines:
        raise CorruptLog(f"log {path} is empty")
    try:
        header = json.loads(lines[0])
        if header.get("kind") != "header":
            raise CorruptLog(f"log {path} does not start with a header record")
        sample = RandomizationSample.from_dict(header["sample"])
        records = [json.loads(line) for line in lines[1:]]
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise CorruptLog(f"log {path} is corrupt: {exc}") from exc
    for rec in records:
        if rec.get("kind") != "step" or "action" not in rec:
            raise CorruptLog(f"log {path} contains a malformed step record")
    return sample, records, header


@dataclass
class ReplayReport:
    identical: bool
    steps_checked: int
    first_divergence: int | None = None
    detail: str = ""

    def summary(self) -> str:
        if self.identical:
            return f"identical ({self.steps_checked} steps)"
        return f"divergence at step {self.first_divergence}: {self.detail}"


def replay_episode(env: GraspEnv, log_path: str) -> ReplayReport:
    """Re-run the logged actions and compare every step bitwise."""
    sample, records, _ = read_episode_log(log_path)
    _, obs = env.reset(sample)
    for i, rec in enumerate(records):
        logged_obs = rec.get("observation")
        if logged_obs is not None and obs.tolist() != logged_obs:
            return ReplayReport(False, i, rec.get("step", i), "observation mismatch")
        try:
            state, obs, reward, done, info = env.step(np.asarray(rec["action"], dtype=float))
        except SteppedTerminatedEpisode:
            return ReplayReport(False, i, rec.get("step", i), "episode terminated early on replay")
        if "reward" in rec and reward != rec["reward"]:
            return ReplayReport(False, i, rec.get("step", i), "reward mismatch")
        if "phase" in rec and state.phase.value != rec["phase"]:
            return ReplayReport(False, i, rec.get("step", i), "phase mismatch")
        if done and i + 1 < len(records):
            return ReplayReport(False, i, rec.get("step", i),
                                "episode ended before the log did")
    return ReplayReport(True, len(records))
