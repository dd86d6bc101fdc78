"""Proximal policy optimization over a diagonal-Gaussian MLP policy.

Single-process trainer: N task instances ("workers") are stepped round-robin
in index order, observations are batched through the policy, and updates use
the clipped surrogate with generalized advantage estimation.  Everything is
driven by one seeded generator, so a (seed, config) pair reproduces training
bit for bit.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .nn import MLP, Adam, RunningNorm, flatten_grads

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
CHECKPOINT_MAGIC = "graspweb-checkpoint"
CHECKPOINT_VERSION = 1


class NonFiniteObservation(Exception):
    pass


class NonFiniteGradient(Exception):
    pass


class LengthMismatch(Exception):
    pass


class CheckpointVersionMismatch(Exception):
    pass


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 3e-4
    clip_ratio: float = 0.2
    discount: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 4
    minibatch_size: int = 256
    horizon: int = 2048          # steps per worker per update round
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    workers: int = 8
    total_steps: int = 2_000_000
    hidden: tuple[int, int] = (128, 128)
    checkpoint_interval: int = 10  # update rounds between checkpoints
    seed: int = 0

    def validate(self) -> None:
        if not (0.0 < self.clip_ratio < 1.0):
            raise ValueError("clip_ratio must be in (0, 1)")
        for name in ("discount", "gae_lambda"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must be in (0, 1]")
        if self.workers < 1 or self.horizon < 1 or self.minibatch_size < 1:
            raise ValueError("workers, horizon and minibatch_size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "clip_ratio": self.clip_ratio,
            "discount": self.discount,
            "gae_lambda": self.gae_lambda,
            "epochs": self.epochs,
            "minibatch_size": self.minibatch_size,
            "horizon": self.horizon,
            "entropy_coef": self.entropy_coef,
            "value_coef": self.value_coef,
            "max_grad_norm": self.max_grad_norm,
            "workers": self.workers,
            "total_steps": self.total_steps,
            "hidden": list(self.hidden),
            "checkpoint_interval": self.checkpoint_interval,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainerConfig":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", (128, 128)))
        return cls(**d)


def config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


# ----------------------------------------------------------------------
# Policy
# ----------------------------------------------------------------------

class PolicyNetwork:
    """Diagonal-Gaussian policy head (mean and log-std per action) plus a
    separate value head, sharing an observation normalizer."""

    def __init__(self, obs_dim: int, action_dim: int, hidden=(128, 128),
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng()
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.policy = MLP([obs_dim, *hidden, 2 * action_dim], rng)
        self.value = MLP([obs_dim, *hidden, 1], rng)
        self.normalizer = RunningNorm(obs_dim)
        # Start with small policy outputs so initial actions are near zero
        # and log-std ~ -0.5 after the bias shift below.
        self.policy.weights[-1] *= 0.01
        self.policy.biases[-1][action_dim:] = -0.5

    # -- distribution helpers -------------------------------------------
    def _split(self, out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mean = out[:, : self.action_dim]
        log_std_raw = out[:, self.action_dim :]
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std, log_std_raw

    def act(self, obs: np.ndarray, rng: np.random.Generator | None = None,
            deterministic: bool = False, update_norm: bool = False):
        """Action(s), log-prob(s) and value(s) for a batch of observations.

        Stochastic mode samples the diagonal Gaussian; the sampled (unclamped)
        action is returned along with its pre-clamp log-probability, and
        callers clamp to action bounds before stepping an environment.
        """
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        if not np.all(np.isfinite(obs)):
            raise NonFiniteObservation("observation contains NaN or inf")
        if update_norm:
            self.normalizer.update(obs)
        x = self.normalizer.normalize(obs)
        out, _ = self.policy.forward(x)
        mean, log_std, _ = self._split(out)
        value = self.value(x)[:, 0]
        if deterministic:
            logp = self._log_prob(mean, mean, log_std)
            return mean, logp, value
        if rng is None:
            raise ValueError("stochastic act needs an rng")
        noise = rng.standard_normal(mean.shape)
        action = mean + np.exp(log_std) * noise
        return action, self._log_prob(action, mean, log_std), value

    @staticmethod
    def _log_prob(action, mean, log_std) -> np.ndarray:
        z = (action - mean) / np.exp(log_std)
        return -0.5 * np.sum(z**2 + 2.0 * log_std + np.log(2.0 * np.pi), axis=1)

    # -- parameter plumbing ----------------------------------------------
    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([self.policy.flat_parameters(), self.value.flat_parameters()])

    def set_flat_parameters(self, flat: np.ndarray) -> None:
        n = self.policy.flat_parameters().size
        self.policy.set_flat_parameters(flat[:n])
        self.value.set_flat_parameters(flat[n:])


# ----------------------------------------------------------------------
# GAE
# ----------------------------------------------------------------------

def compute_gae(rewards, values, dones, discount: float, lam: float, last_value: float = 0.0):
    """Generalized advantage estimation over one trajectory stream.

    `dones[t]` marks a terminal transition at step t (no bootstrap across
    it); `last_value` bootstraps the final step when the stream was cut by
    the horizon rather than termination.  Returns (advantages, returns).
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if not (len(rewards) == len(values) == len(dones)):
        raise LengthMismatch("rewards, values and dones must have equal length")
    T = len(rewards)
    adv = np.zeros(T)
    next_adv = 0.0
    next_value = float(last_value)
    for t in range(T - 1, -1, -1):
        mask = 0.0 if dones[t] else 1.0
        delta = rewards[t] + discount * next_value * mask - values[t]
        next_adv = delta + discount * lam * mask * next_adv
        adv[t] = next_adv
        next_value = values[t]
    return adv, adv + values


# ----------------------------------------------------------------------
# PPO loss and update
# ----------------------------------------------------------------------

@dataclass
class Batch:
    observations: np.ndarray   # raw (unnormalized) observations
    actions: np.ndarray
    log_probs: np.ndarray      # behavior-policy log-probs
    advantages: np.ndarray     # already normalized by the caller
    returns: np.ndarray


def ppo_loss(net: PolicyNetwork, batch: Batch, cfg: TrainerConfig) -> tuple[float, dict]:
    """Clipped-surrogate + value + entropy loss (scalar), for gradient checks."""
    x = net.normalizer.normalize(batch.observations)
    out, _ = net.policy.forward(x)
    mean, log_std, _ = net._split(out)
    logp = net._log_prob(batch.actions, mean, log_std)
    ratio = np.exp(logp - batch.log_probs)
    clipped = np.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio)
    surrogate = np.minimum(ratio * batch.advantages, clipped * batch.advantages)
    policy_loss = -float(np.mean(surrogate))

    v = net.value(x)[:, 0]
    value_loss = 0.5 * float(np.mean((v - batch.returns) ** 2))

    entropy = float(np.mean(np.sum(log_std + 0.5 * np.log(2.0 * np.pi * np.e), axis=1)))
    total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    stats = {
        "loss": total,
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy,
        "kl": float(np.mean(batch.log_probs - logp)),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_ratio)),
    }
    return total, stats


def ppo_grads(net: PolicyNetwork, batch: Batch, cfg: TrainerConfig) -> tuple[np.ndarray, dict]:
    """Analytic gradient of ppo_loss wrt the flat parameter vector."""
    n = len(batch.advantages)
    x = net.normalizer.normalize(batch.observations)

    out, p_cache = net.policy.forward(x)
    mean, log_std, log_std_raw = net._split(out)
    std = np.exp(log_std)
    z = (batch.actions - mean) / std
    logp = -0.5 * np.sum(z**2 + 2.0 * log_std + np.log(2.0 * np.pi), axis=1)
    ratio = np.exp(logp - batch.log_probs)

    adv = batch.advantages
    lo, hi = 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio
    unclipped = ratio * adv
    clipped = np.clip(ratio, lo, hi) * adv
    # d surrogate / d ratio: the clipped branch has zero gradient when active
    use_unclipped = unclipped <= clipped  # min() picks the unclipped term
    inside = (ratio > lo) & (ratio < hi)
    dsur_dratio = np.where(use_unclipped, adv, np.where(inside, adv, 0.0))
    dl_dlogp = -(dsur_dratio * ratio) / n  # policy loss = -mean(surrogate)

    # logp gradients: d logp / d mean = z / std ; d logp / d log_std = z^2 - 1
    dmean = dl_dlogp[:, None] * (z / std)
    dlog_std = dl_dlogp[:, None] * (z**2 - 1.0)
    # entropy bonus: d(-c_e * mean(sum(log_std))) / d log_std = -c_e / n
    dlog_std = dlog_std - cfg.entropy_coef / n
    # clamp mask on the raw log-std outputs
    mask = (log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)
    d_out = np.concatenate([dmean, dlog_std * mask], axis=1)
    policy_grads = net.policy.backward(p_cache, d_out)

    v_out, v_cache = net.value.forward(x)
    dv = cfg.value_coef * (v_out[:, 0] - batch.returns)[:, None] / n
    value_grads = net.value.backward(v_cache, dv)

    flat = np.concatenate([flatten_grads(policy_grads), flatten_grads(value_grads)])
    _, stats = ppo_loss(net, batch, cfg)
    return flat, stats


def ppo_update(net: PolicyNetwork, optimizer: Adam, batch: Batch, cfg: TrainerConfig) -> dict:
    """One minibatch gradient step; raises on non-finite gradients."""
    grads, stats = ppo_grads(net, batch, cfg)
    if not np.all(np.isfinite(grads)):
        digest = hashlib.sha256(batch.observations.tobytes()).hexdigest()[:12]
        raise NonFiniteGradient(f"non-finite gradient on batch {digest}")
    norm = float(np.linalg.norm(grads))
    if cfg.max_grad_norm > 0 and norm > cfg.max_grad_norm:
        grads = grads * (cfg.max_grad_norm / norm)
    net.set_flat_parameters(optimizer.step(net.flat_parameters(), grads))
    stats["grad_norm"] = norm
    return stats


# ----------------------------------------------------------------------
# Checkpoints
# ----------------------------------------------------------------------

def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype=np.float64)
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(a.tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype=np.float64).reshape(d["shape"]).copy()


def save_checkpoint(
    path: str,
    net: PolicyNetwork,
    cfg_hash: str,
    global_step: int,
    curriculum_stage: int,
    rng_state: dict | None,
    extra: dict | None = None,
) -> None:
    payload = {
        "magic": CHECKPOINT_MAGIC,
        "format_version": CHECKPOINT_VERSION,
        "config_hash": cfg_hash,
        "global_step": global_step,
        "curriculum_stage": curriculum_stage,
        "obs_dim": net.obs_dim,
        "action_dim": net.action_dim,
        "policy_sizes": net.policy.sizes,
        "value_sizes": net.value.sizes,
        "policy_params": _encode_array(net.policy.flat_parameters()),
        "value_params": _encode_array(net.value.flat_parameters()),
        "normalizer": {
            "mean": _encode_array(net.normalizer.mean),
            "var": _encode_array(net.normalizer.var),
            "count": net.normalizer.count,
            "clip": net.normalizer.clip,
        },
        "rng_state": rng_state,
        "extra": extra or {},
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> tuple[PolicyNetwork, dict]:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("magic") != CHECKPOINT_MAGIC:
        raise CheckpointVersionMismatch(f"{path} is not a policy checkpoint")
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointVersionMismatch(
            f"checkpoint format {payload.get('format_version')} != supported {CHECKPOINT_VERSION}"
        )
    hidden = tuple(payload["policy_sizes"][1:-1])
    net = PolicyNetwork(payload["obs_dim"], payload["action_dim"], hidden,
                        rng=np.random.default_rng(0))
    net.policy.set_flat_parameters(_decode_array(payload["policy_params"]))
    net.value.set_flat_parameters(_decode_array(payload["value_params"]))
    net.normalizer.mean = _decode_array(payload["normalizer"]["mean"])
    net.normalizer.var = _decode_array(payload["normalizer"]["var"])
    net.normalizer.count = float(payload["normalizer"]["count"])
    net.normalizer.clip = float(payload["normalizer"]["clip"])
    return net, payload


# ----------------------------------------------------------------------
# Training driver
# ----------------------------------------------------------------------

class Task(Protocol):
    """Environment interface the trainer drives."""

    obs_dim: int
    action_dim: int

    def reset(self, episode_index: int, stage: int) -> np.ndarray: ...

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, bool, dict]: ...


@dataclass
class TrainResult:
    checkpoint_paths: list[str]
    metrics_path: str
    global_step: int
    final_stage: int
    episodes: int
    success_rate: float


def train(
    cfg: TrainerConfig,
    task_factory: Callable[[int], Task],
    out_dir: str,
    curriculum_update: Callable[[bool], int] | None = None,
    initial_stage: int = 1,
    run_config_hash: str = "",
    log_every: int = 1,
    progress: Callable[[dict], None] | None = None,
    resume_from: str | None = None,
) -> TrainResult:
    """Drive PPO to `cfg.total_steps` environment steps.

    `task_factory(worker_index)` builds one environment instance per worker;
    `curriculum_update(penalized) -> stage` is called once per finished
    episode, in worker index order, and its return value is the stage used
    for subsequent resets.  `resume_from` restores weights, normalizer, RNG
    state, curriculum stage and the global step counter from a checkpoint
    (optimizer moments restart).
    """
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    tasks = [task_factory(i) for i in range(cfg.workers)]
    obs_dim, action_dim = tasks[0].obs_dim, tasks[0].action_dim
    net = PolicyNetwork(obs_dim, action_dim, cfg.hidden, rng=rng)
    resume_step = 0
    if resume_from is not None:
        net, payload = load_checkpoint(resume_from)
        if net.obs_dim != obs_dim or net.action_dim != action_dim:
            raise CheckpointVersionMismatch(
                f"checkpoint dims ({net.obs_dim}, {net.action_dim}) do not match "
                f"task dims ({obs_dim}, {action_dim})"
            )
        resume_step = int(payload["global_step"])
        initial_stage = int(payload.get("curriculum_stage", initial_stage))
        if payload.get("rng_state"):
            rng.bit_generator.state = payload["rng_state"]
    optimizer = Adam(net.flat_parameters().size, lr=cfg.learning_rate)

    cfg_hash = run_config_hash or config_hash(cfg.to_dict())
    metrics_path = os.path.join(out_dir, "metrics.csv")
    metrics_fh = open(metrics_path, "w", newline="")
    writer = csv.writer(metrics_fh)
    writer.writerow(["step", "mean_return", "success_rate", "penalty_rate", "stage", "kl", "clip_frac"])

    stage = initial_stage
    episode_index = 0
    global_step = resume_step
    checkpoint_paths: list[str] = []
    recent_returns: list[float] = []
    recent_success: list[bool] = []
    recent_penalty: list[bool] = []
    episode_returns = np.zeros(cfg.workers)
    episode_penalized = [False] * cfg.workers
    episodes_done = 0

    def emit_checkpoint(tag: str) -> None:
        path = os.path.join(out_dir, f"checkpoint_{tag}.json")
        save_checkpoint(
            path, net, cfg_hash, global_step, stage,
            rng_state=rng.bit_generator.state,
            extra={"episodes": episodes_done},
        )
        checkpoint_paths.append(path)

    obs = np.zeros((cfg.workers, obs_dim))
    for w, task in enumerate(tasks):
        obs[w] = task.reset(episode_index, stage)
        episode_index += 1

    emit_checkpoint("000000")
    if cfg.total_steps <= 0:
        metrics_fh.close()
        return TrainResult(checkpoint_paths, metrics_path, 0, stage, 0, 0.0)

    rounds = 0
    t_start = time.time()
    while global_step < cfg.total_steps:
        T, W = cfg.horizon, cfg.workers
        buf_obs = np.zeros((T, W, obs_dim))
        buf_act = np.zeros((T, W, action_dim))
        buf_logp = np.zeros((T, W))
        buf_val = np.zeros((T, W))
        buf_rew = np.zeros((T, W))
        buf_done = np.zeros((T, W), dtype=bool)

        for t in range(T):
            actions, logps, values = net.act(obs, rng=rng, update_norm=True)
            buf_obs[t] = obs
            buf_act[t] = actions
            buf_logp[t] = logps
            buf_val[t] = values
            clipped = np.clip(actions, -1.0, 1.0)
            for w, task in enumerate(tasks):
                next_obs, reward, done, info = task.step(clipped[w])
                buf_rew[t, w] = reward
                buf_done[t, w] = done
                episode_returns[w] += reward
                episode_penalized[w] = episode_penalized[w] or info.get("penalized", False)
                if done:
                    recent_returns.append(episode_returns[w])
                    recent_success.append(info.get("outcome") == "success")
                    recent_penalty.append(episode_penalized[w])
                    episodes_done += 1
                    if curriculum_update is not None:
                        stage = curriculum_update(episode_penalized[w])
                    episode_returns[w] = 0.0
                    episode_penalized[w] = False
                    next_obs = task.reset(episode_index, stage)
                    episode_index += 1
                obs[w] = next_obs
            global_step += W

        _, _, last_values = net.act(obs, deterministic=True)
        adv = np.zeros((T, W))
        ret = np.zeros((T, W))
        for w in range(W):
            adv[:, w], ret[:, w] = compute_gae(
                buf_rew[:, w], buf_val[:, w], buf_done[:, w],
                cfg.discount, cfg.gae_lambda, last_values[w],
            )

        flat_obs = buf_obs.reshape(T * W, obs_dim)
        flat_act = buf_act.reshape(T * W, action_dim)
        flat_logp = buf_logp.reshape(T * W)
        flat_adv = adv.reshape(T * W)
        flat_ret = ret.reshape(T * W)
        if flat_adv.size > 1:
            flat_adv = (flat_adv - flat_adv.mean()) / (flat_adv.std() + 1e-8)

        kl_acc, clip_acc, n_mb = 0.0, 0.0, 0
        for _ in range(cfg.epochs):
            order = rng.permutation(T * W)
            for start in range(0, T * W, cfg.minibatch_size):
                idx = order[start : start + cfg.minibatch_size]
                batch = Batch(flat_obs[idx], flat_act[idx], flat_logp[idx],
                              flat_adv[idx], flat_ret[idx])
                stats = ppo_update(net, optimizer, batch, cfg)
                kl_acc += stats["kl"]
                clip_acc += stats["clip_frac"]
                n_mb += 1

        rounds += 1
        recent_returns = recent_returns[-100:]
        recent_success = recent_success[-100:]
        recent_penalty = recent_penalty[-100:]
        if rounds % log_every == 0:
            row = [
                global_step,
                float(np.mean(recent_returns)) if recent_returns else 0.0,
                float(np.mean(recent_success)) if recent_success else 0.0,
                float(np.mean(recent_penalty)) if recent_penalty else 0.0,
                stage,
                kl_acc / max(n_mb, 1),
                clip_acc / max(n_mb, 1),
            ]
            writer.writerow(row)
            metrics_fh.flush()
            if progress is not None:
                progress({
                    "step": global_step,
                    "return": row[1],
                    "success": row[2],
                    "penalty": row[3],
                    "stage": stage,
                    "elapsed": time.time() - t_start,
                })
        if rounds % cfg.checkpoint_interval == 0:
            emit_checkpoint(f"{global_step:09d}")

    emit_checkpoint("final")
    metrics_fh.close()
    return TrainResult(
        checkpoint_paths,
        metrics_path,
        global_step,
        stage,
        episodes_done,
        float(np.mean(recent_success)) if recent_success else 0.0,
    )
