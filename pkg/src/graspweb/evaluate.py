"""Robustness sweep harness: success matrices over shape and approach grids.

Two presets reproduce the published protocol for the active-force skill:

  shape sweep    : depth 2..6 cm and width 6..10 cm in 1 cm steps, top
                   curvature exponent in {sharp, 1, 2} (75 cells), approach
                   fixed to (0, 0); either one noiseless trial per cell or
                   the same 16 recognition-noise patterns replayed in every
                   cell
  approach sweep : zenith 0..60 deg in 10 deg steps, azimuth -45..45 deg in
                   15 deg steps (49 cells) on three probe objects, no noise

Cells are fully independent: each derives its own episode seed from
(sweep seed, cell index, trial index), so execution order cannot matter.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .contact_web import ApproachDirection, GraspType, PlacementFailure, WebNoise, perturb_web, place_web
from .env import GraspEnv, Outcome, run_episode
from .geometry import EPS_EXPONENT_MIN, SuperquadricParams, SuperquadricObject
from .randomize import OBJECT_HEIGHT, RandomizationSample
from .transforms import Pose

OUTCOME_CODES = [
    Outcome.SUCCESS,
    Outcome.TIMEOUT,
    Outcome.LOST_CONTACT,
    Outcome.OBJECT_MOVED,
    Outcome.LIFT_FAIL,
    Outcome.PLACEMENT_FAIL,
    Outcome.PLANE_COLLISION,
]


class IoFailure(Exception):
    pass


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple[tuple[str, tuple], ...]      # ordered (name, values)
    grasp_type: GraspType = GraspType.ACTIVE_FORCE
    approach: ApproachDirection = field(default_factory=lambda: ApproachDirection(0.0, 0.0))
    noisy: bool = False
    noise_samples: int = 16
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.axes or any(len(v) == 0 for _, v in self.axes):
            raise ValueError("every sweep axis needs at least one value")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def cells(self) -> list[dict]:
        coords = [{}]
        for name, values in self.axes:
            coords = [dict(c, **{name: v}) for c in coords for v in values]
        return coords


@dataclass
class CellResult:
    coords: dict
    successes: int
    trials: int
    outcomes: list[str]


@dataclass
class SuccessMatrix:
    axes: list[tuple[str, list]]
    cells: list[CellResult]
    meta: dict = field(default_factory=dict)

    def success_rate(self) -> float:
        total = sum(c.trials for c in self.cells)
        return sum(c.successes for c in self.cells) / total if total else 0.0

    def cell(self, **coords) -> CellResult:
        for c in self.cells:
            if all(np.isclose(c.coords[k], v) for k, v in coords.items()):
                return c
        raise KeyError(f"no cell at {coords}")

    def to_dict(self) -> dict:
        return {
            "axes": [[name, list(values)] for name, values in self.axes],
            "cells": [
                {
                    "coords": c.coords,
                    "successes": c.successes,
                    "trials": c.trials,
                    "outcomes": c.outcomes,
                }
                for c in self.cells
            ],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SuccessMatrix":
        return cls(
            axes=[(name, list(values)) for name, values in d["axes"]],
            cells=[
                CellResult(c["coords"], int(c["successes"]), int(c["trials"]), list(c["outcomes"]))
                for c in d["cells"]
            ],
            meta=dict(d.get("meta", {})),
        )


# ----------------------------------------------------------------------
# Presets (axis values in meters / radians; eps2 dimensionless)
# ----------------------------------------------------------------------

def shape_sweep_spec(seed: int = 0, noisy: bool = False) -> SweepSpec:
    depths = tuple(round(0.02 + 0.01 * i, 3) for i in range(5))
    widths = tuple(round(0.06 + 0.01 * i, 3) for i in range(5))
    eps2 = (EPS_EXPONENT_MIN, 1.0, 2.0)
    return SweepSpec(
        axes=(("depth", depths), ("width", widths), ("eps2", eps2)),
        grasp_type=GraspType.ACTIVE_FORCE,
        approach=ApproachDirection(0.0, 0.0),
        noisy=noisy,
        noise_samples=16,
        trials=1,
        seed=seed,
    )


APPROACH_PROBES = (
    {"depth": 0.04, "width": 0.10, "eps2": EPS_EXPONENT_MIN},
    {"depth": 0.04, "width": 0.06, "eps2": EPS_EXPONENT_MIN},
    {"depth": 0.04, "width": 0.10, "eps2": 2.0},
)


def approach_sweep_spec(seed: int = 0) -> SweepSpec:
    zeniths = tuple(np.deg2rad(10.0 * i) for i in range(7))
    azimuths = tuple(np.deg2rad(-45.0 + 15.0 * i) for i in range(7))
    return SweepSpec(
        axes=(("zenith", zeniths), ("azimuth", azimuths)),
        grasp_type=GraspType.ACTIVE_FORCE,
        noisy=False,
        trials=1,
        seed=seed,
    )


# ----------------------------------------------------------------------
# Execution
# ----------------------------------------------------------------------

def _cell_seed(sweep_seed: int, cell_index: int, trial_index: int) -> int:
    return int(
        np.random.default_rng([sweep_seed, cell_index, trial_index]).integers(0, 2**31 - 1)
    )


def _noise_patterns(spec: SweepSpec) -> list[WebNoise]:
    """The shared per-sweep noise patterns, identical for every cell."""
    if not spec.noisy:
        return [WebNoise.zero()]
    rng = np.random.default_rng([spec.seed, 778_899])
    return [WebNoise.sample(rng) for _ in range(spec.noise_samples)]


def _build_sample(
    params: SuperquadricParams,
    grasp_type: GraspType,
    approach: ApproachDirection,
    noise: WebNoise,
    seed: int,
) -> RandomizationSample:
    pose = Pose.identity()
    actual = place_web(SuperquadricObject(params, pose), grasp_type)
    recognized = perturb_web(actual, noise)
    return RandomizationSample(
        object_params=params,
        object_pose=pose,
        actual_web=actual,
        recognized_web=recognized,
        approach=approach,
        noise=noise,
        grasp_type=grasp_type,
        seed=seed,
        stage=2,
    )


def _run_cells(
    spec: SweepSpec,
    policy,
    env_factory,
    sample_builder,
    meta: dict,
) -> SuccessMatrix:
    patterns = _noise_patterns(spec)
    trials_per_cell = spec.trials * len(patterns)
    cells: list[CellResult] = []
    noise_log: list[list] = [[n.translation.tolist(), n.rotation_angle] for n in patterns]
    for cell_index, coords in enumerate(spec.cells()):
        outcomes: list[str] = []
        for trial in range(spec.trials):
            for k, noise in enumerate(patterns):
                seed = _cell_seed(spec.seed, cell_index, trial * len(patterns) + k)
                try:
                    sample = sample_builder(coords, noise, seed)
                except PlacementFailure:
                    outcomes.append(Outcome.PLACEMENT_FAIL)
                    continue
                env = env_factory()
                result = run_episode(env, sample, policy)
                outcomes.append(result.outcome)
        cells.append(
            CellResult(coords, sum(o == Outcome.SUCCESS for o in outcomes), trials_per_cell, outcomes)
        )
    return SuccessMatrix(
        axes=[(name, list(values)) for name, values in spec.axes],
        cells=cells,
        meta=dict(meta, seed=spec.seed, noisy=spec.noisy, noise_patterns=noise_log),
    )


def run_shape_sweep(spec: SweepSpec, policy, env_factory=GraspEnv) -> SuccessMatrix:
    """Grasp-success matrix over object shapes at a fixed approach."""

    def build(coords, noise, seed):
        params = SuperquadricParams(
            a1=coords["depth"] / 2.0,
            a2=coords["width"] / 2.0,
            a3=OBJECT_HEIGHT / 2.0,
            eps1=EPS_EXPONENT_MIN,
            eps2=coords["eps2"],
        )
        return _build_sample(params, spec.grasp_type, spec.approach, noise, seed)

    return _run_cells(spec, policy, env_factory, build, {"sweep": "shape"})


def run_approach_sweep(
    spec: SweepSpec, policy, env_factory=GraspEnv, probes=APPROACH_PROBES
) -> list[SuccessMatrix]:
    """One zenith x azimuth success matrix per probe object, noise disabled."""
    matrices = []
    for probe_index, probe in enumerate(probes):
        params = SuperquadricParams(
            a1=probe["depth"] / 2.0,
            a2=probe["width"] / 2.0,
            a3=OBJECT_HEIGHT / 2.0,
            eps1=EPS_EXPONENT_MIN,
            eps2=probe["eps2"],
        )

        def build(coords, noise, seed, params=params):
            approach = ApproachDirection(coords["zenith"], coords["azimuth"])
            return _build_sample(params, spec.grasp_type, approach, noise, seed)

        meta = {"sweep": "approach", "probe_index": probe_index, "probe": dict(probe)}
        matrices.append(_run_cells(spec, policy, env_factory, build, meta))
    return matrices


# ----------------------------------------------------------------------
# Export / import
# ----------------------------------------------------------------------

def export_matrix(matrix: SuccessMatrix, path: str, fmt: str = "csv") -> None:
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                axis_names = [name for name, _ in matrix.axes]
                writer.writerow(axis_names + ["successes", "trials"] + OUTCOME_CODES)
                for cell in matrix.cells:
                    hist = [cell.outcomes.count(code) for code in OUTCOME_CODES]
                    writer.writerow(
                        [cell.coords[n] for n in axis_names]
                        + [cell.successes, cell.trials]
                        + hist
                    )
        elif fmt == "json":
            with open(path, "w") as fh:
                json.dump(matrix.to_dict(), fh, indent=1)
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_matrix(path: str) -> SuccessMatrix:
    try:
        with open(path) as fh:
            return SuccessMatrix.from_dict(json.load(fh))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def deterministic_policy(net):
    """Wrap a PolicyNetwork as a deterministic obs -> clipped action callable."""

    def policy(obs: np.ndarray) -> np.ndarray:
        action, _, _ = net.act(obs, deterministic=True)
        return np.clip(action[0], -1.0, 1.0)

    return policy
