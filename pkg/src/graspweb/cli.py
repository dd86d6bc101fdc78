"""Command-line entry point.

Commands (all non-interactive; exit codes: 0 success, 2 config error,
3 runtime error):

  init-config   write a template run-config YAML with documented defaults
  train         train a grasp policy per the config, emitting checkpoints
                and a metrics CSV
  sweep         run a robustness sweep preset with a trained checkpoint and
                export success matrices
  eval-episode  run one episode, printing per-step rewards (optionally
                logging the trajectory)
  replay        re-run a logged episode and report the first divergence

The GRASPWEB_WORKERS environment variable overrides trainer.workers.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, RunConfig, default_config, load_config, template_yaml
from .contact_web import GraspType
from .env import Outcome, run_episode
from .evaluate import (
    approach_sweep_spec,
    deterministic_policy,
    export_matrix,
    run_approach_sweep,
    run_shape_sweep,
    shape_sweep_spec,
)
from .ppo import CheckpointVersionMismatch, load_checkpoint, train
from .randomize import CurriculumState, draw_sample, update_curriculum
from .replay import CorruptLog, replay_episode, write_episode_log
from .tasks import GraspTask

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load(args) -> RunConfig:
    rc = load_config(args.config, overrides=args.set or [])
    if getattr(args, "grasp_type", None):
        gt = GraspType(args.grasp_type)
        rc = replace(rc, grasp_type=gt, randomization=replace(rc.randomization, grasp_type=gt))
        rc.validate()
    workers_env = os.environ.get("GRASPWEB_WORKERS")
    if workers_env:
        rc = replace(rc, trainer=replace(rc.trainer, workers=int(workers_env)))
    return rc


def cmd_init_config(args) -> int:
    try:
        text = template_yaml(GraspType(args.grasp_type), args.seed)
        with open(args.path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {args.path}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    # the emitted template must parse back validly
    load_config(args.path)
    print(f"wrote {args.path}")
    return EXIT_OK


def cmd_train(args) -> int:
    rc = _load(args)
    cfg = rc.trainer
    if args.total_steps is not None:
        cfg = replace(cfg, total_steps=args.total_steps)
    os.makedirs(args.out, exist_ok=True)

    curriculum = CurriculumState(stage=rc.randomization.initial_stage)

    def curriculum_cb(penalized: bool) -> int:
        nonlocal curriculum
        curriculum = update_curriculum(curriculum, penalized, rc.randomization)
        return curriculum.stage

    def factory(w: int) -> GraspTask:
        return GraspTask(rc.build_env(), rc.randomization, sample_seed=rc.seed * 1000 + w)

    def progress(d: dict) -> None:
        print(
            f"step {d['step']:9d}  return {d['return']:9.2f}  success {d['success']:.3f}  "
            f"penalty {d['penalty']:.3f}  stage {d['stage']}  ({d['elapsed']:.0f}s)",
            flush=True,
        )

    result = train(
        cfg,
        factory,
        args.out,
        curriculum_update=curriculum_cb,
        initial_stage=rc.randomization.initial_stage,
        run_config_hash=rc.digest(),
        progress=progress,
        resume_from=args.resume,
    )
    print(
        f"trained {result.global_step} steps, {result.episodes} episodes, "
        f"final success rate {result.success_rate:.3f}"
    )
    print(f"metrics: {result.metrics_path}")
    print(f"checkpoints: {', '.join(result.checkpoint_paths[-2:])}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    rc = _load(args)
    net, payload = load_checkpoint(args.checkpoint)
    policy = deterministic_policy(net)
    os.makedirs(os.path.dirname(os.path.abspath(args.out_prefix)) or ".", exist_ok=True)
    outputs = []
    if args.preset in ("shape", "shape-noisy"):
        spec = shape_sweep_spec(seed=rc.seed, noisy=args.preset == "shape-noisy")
        matrix = run_shape_sweep(spec, policy, env_factory=rc.build_env)
        matrix.meta["config_hash"] = rc.digest()
        matrix.meta["checkpoint"] = os.path.basename(args.checkpoint)
        path = f"{args.out_prefix}_shape.{args.format}"
        export_matrix(matrix, path, args.format)
        outputs.append((path, matrix))
    elif args.preset == "approach":
        spec = approach_sweep_spec(seed=rc.seed)
        for matrix in run_approach_sweep(spec, policy, env_factory=rc.build_env):
            matrix.meta["config_hash"] = rc.digest()
            matrix.meta["checkpoint"] = os.path.basename(args.checkpoint)
            probe = matrix.meta["probe_index"]
            path = f"{args.out_prefix}_approach_{probe}.{args.format}"
            export_matrix(matrix, path, args.format)
            outputs.append((path, matrix))
    else:
        print(f"error: unknown preset {args.preset!r}", file=sys.stderr)
        return EXIT_CONFIG
    for path, matrix in outputs:
        print(f"{path}: {len(matrix.cells)} cells, success rate {matrix.success_rate():.3f}")
    return EXIT_OK


def cmd_eval_episode(args) -> int:
    rc = _load(args)
    env = rc.build_env()
    sample = draw_sample(rc.randomization, args.stage, rc.seed, args.episode_index)
    if args.checkpoint:
        net, _ = load_checkpoint(args.checkpoint)
        policy = deterministic_policy(net)
    else:
        policy = lambda obs: np.zeros(env.action_dim())  # noqa: E731
    result = run_episode(env, sample, policy, collect_log=True)
    for rec in result.records:
        events = f"  events={rec['events']}" if rec["events"] else ""
        print(f"step {rec['step']:3d}  phase {rec['phase']:16s}  reward {rec['reward']:9.4f}{events}")
    print(f"outcome: {result.outcome}  total reward {result.total_reward:.3f}  steps {result.steps}")
    if args.log:
        write_episode_log(args.log, sample, result.records, config_hash=rc.digest())
        print(f"logged to {args.log}")
    return EXIT_OK


def cmd_replay(args) -> int:
    rc = _load(args)
    report = replay_episode(rc.build_env(), args.log)
    print(report.summary())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graspweb", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-config", help="write a template run config")
    p.add_argument("path")
    p.add_argument("--grasp-type", default="active_force",
                   choices=[g.value for g in GraspType])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init_config)

    def common(p):
        p.add_argument("--config", required=True, help="run-config YAML path")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config value")
        p.add_argument("--grasp-type", choices=[g.value for g in GraspType])

    p = sub.add_parser("train", help="train a grasp policy")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--total-steps", type=int, default=None)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run a robustness sweep")
    common(p)
    p.add_argument("--preset", required=True, choices=["shape", "shape-noisy", "approach"])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval-episode", help="run one episode and print rewards")
    common(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--episode-index", type=int, default=0)
    p.add_argument("--stage", type=int, default=1)
    p.add_argument("--log", default=None, help="write the trajectory log here")
    p.set_defaults(func=cmd_eval_episode)

    p = sub.add_parser("replay", help="replay a trajectory log and audit determinism")
    common(p)
    p.add_argument("--log", required=True)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointVersionMismatch as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except CorruptLog as exc:
        print(f"log error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
