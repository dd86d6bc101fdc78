import sys
import numpy as np
from graspweb.ppo import TrainerConfig, train
from graspweb.tasks import GraspTask
from graspweb.env import GraspEnv
from graspweb.randomize import RandomizationConfig
from graspweb.contact_web import GraspType

rand_cfg = RandomizationConfig(
    grasp_type=GraspType.ACTIVE_FORCE,
    zenith_range=(0.0, np.deg2rad(20.0)),
    azimuth_range=(-np.deg2rad(15.0), np.deg2rad(15.0)),
    noise_enabled=True,
    stage2_enabled=False,
)
cfg = TrainerConfig(total_steps=400_000, workers=8, horizon=2048, seed=11)

def factory(w):
    return GraspTask(GraspEnv(), rand_cfg, sample_seed=1000 + w)

def prog(d):
    print(f"step {d['step']:8d} ret {d['return']:9.2f} succ {d['success']:.3f} pen {d['penalty']:.3f} ({d['elapsed']:.0f}s)", flush=True)

res = train(cfg, factory, "/root/pkg/runs/af_stage1", progress=prog)
print("DONE", res.global_step, "success", res.success_rate, flush=True)
