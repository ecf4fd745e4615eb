"""PPO training with locality regularisation, magnitude pruning and fine-tuning.

The run has two phases. Phase 1 trains with the scheduled connection-cost
loss and periodic neuron relocation; the network is then pruned by weight
and neuron magnitude. Phase 2 fine-tunes the pruned network with the
regulariser off and all masks frozen. Only the actor is regularised,
relocated and pruned; the critic is plain PPO throughout.

Everything is float64 and seeded through one SeedSequence, so sequential
runs with the same configs reproduce checkpoints and metrics bit-for-bit.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envs import N_ACTIONS, make_env, obs_dim
from .network import SpatialMLP, backward, forward, init_network, save_checkpoint
from .regularizer import (
    RegConfig,
    connection_cost,
    connection_cost_grad,
    relocate_neurons,
    schedule_lambda,
    weighted_degrees,
)

METRICS_COLUMNS = ("update", "frames", "mean_return", "loss_total", "loss_cc",
                   "lambda", "sparsity_frac")


@dataclass
class TrainConfig:
    n_envs: int = 16
    n_steps: int = 128
    minibatches: int = 8
    epochs: int = 16
    learning_rate: float = 5e-4
    max_grad_norm: float = 0.5
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    total_frames: int = 4_000_000
    finetune_frames: int = 2_000_000
    prune_fraction: float = 0.01
    hidden: list[int] = field(default_factory=lambda: [32, 32])
    activation: str = "tanh"
    seed: int = 0

    @property
    def batch_size(self) -> int:
        return self.n_envs * self.n_steps

    def validate(self) -> None:
        if self.batch_size % self.minibatches != 0:
            raise ValueError("batch size must be divisible by minibatches")
        if not 0.0 <= self.prune_fraction < 1.0:
            raise ValueError("prune_fraction must be in [0, 1)")
        for name in ("n_envs", "n_steps", "minibatches", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.total_frames < 0 or self.finetune_frames < 0:
            raise ValueError("frame budgets must be >= 0")


@dataclass
class RolloutBatch:
    obs: np.ndarray          # (n_envs, n_steps, obs_dim)
    actions: np.ndarray      # (n_envs, n_steps) int
    log_probs: np.ndarray    # (n_envs, n_steps)
    values: np.ndarray       # (n_envs, n_steps)
    rewards: np.ndarray      # (n_envs, n_steps)
    dones: np.ndarray        # (n_envs, n_steps) float 0/1
    last_values: np.ndarray  # (n_envs,) bootstrap for the step after the last
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))


class EnvBatch:
    """Fixed set of environment instances stepped in lockstep with auto-reset."""

    def __init__(self, kind: str, seeds, env_options: dict | None = None):
        opts = dict(env_options or {})
        self.envs = [make_env(kind, s, **opts) for s in seeds]
        self.obs = np.stack([e.observe() for e in self.envs])
        self._ep_return = np.zeros(len(self.envs))
        self.completed_returns: deque = deque(maxlen=100)

    def __len__(self) -> int:
        return len(self.envs)

    def step(self, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Advance every env one step; returns (rewards, dones) and auto-resets."""
        n = len(self.envs)
        rewards = np.zeros(n)
        dones = np.zeros(n)
        for i, env in enumerate(self.envs):
            obs, r, done, _ = env.step(int(actions[i]))
            rewards[i] = r
            self._ep_return[i] += r
            if done:
                dones[i] = 1.0
                self.completed_returns.append(self._ep_return[i])
                self._ep_return[i] = 0.0
                obs = env.reset()
            self.obs[i] = obs
        return rewards, dones

    def mean_return(self) -> float:
        if not self.completed_returns:
            return 0.0
        return float(np.mean(self.completed_returns))


def sample_actions(logits: np.ndarray, rng: np.random.Generator):
    """Categorical sample per row; returns (actions, log_probs)."""
    logp = log_softmax(logits)
    probs = np.exp(logp)
    u = rng.random((logits.shape[0], 1))
    actions = (probs.cumsum(axis=1) < u).sum(axis=1)
    actions = np.minimum(actions, logits.shape[1] - 1)
    return actions, logp[np.arange(len(actions)), actions]


def collect_rollout(actor: SpatialMLP, critic: SpatialMLP, envs: EnvBatch,
                    n_steps: int, rng: np.random.Generator) -> RolloutBatch:
    n = len(envs)
    d = envs.obs.shape[1]
    obs = np.zeros((n, n_steps, d))
    actions = np.zeros((n, n_steps), dtype=np.int64)
    log_probs = np.zeros((n, n_steps))
    values = np.zeros((n, n_steps))
    rewards = np.zeros((n, n_steps))
    dones = np.zeros((n, n_steps))
    for t in range(n_steps):
        obs[:, t] = envs.obs
        logits = forward(actor, envs.obs)
        acts, logp = sample_actions(logits, rng)
        values[:, t] = forward(critic, envs.obs)[:, 0]
        actions[:, t] = acts
        log_probs[:, t] = logp
        rewards[:, t], dones[:, t] = envs.step(acts)
    last_values = forward(critic, envs.obs)[:, 0]
    return RolloutBatch(obs=obs, actions=actions, log_probs=log_probs,
                        values=values, rewards=rewards, dones=dones,
                        last_values=last_values)


def compute_gae(batch: RolloutBatch, gamma: float, gae_lambda: float) -> RolloutBatch:
    """Standard GAE recursion over the rollout, masked at episode ends."""
    n, steps = batch.rewards.shape
    adv = np.zeros((n, steps))
    carry = np.zeros(n)
    for t in range(steps - 1, -1, -1):
        nonterm = 1.0 - batch.dones[:, t]
        next_v = batch.values[:, t + 1] if t + 1 < steps else batch.last_values
        delta = batch.rewards[:, t] + gamma * next_v * nonterm - batch.values[:, t]
        carry = delta + gamma * gae_lambda * nonterm * carry
        adv[:, t] = carry
    batch.advantages = adv
    batch.returns = adv + batch.values
    if not np.all(np.isfinite(adv)):
        raise RuntimeError("non-finite advantages in rollout")
    return batch


def ppo_loss_and_grads(actor: SpatialMLP, critic: SpatialMLP, obs: np.ndarray,
                       actions: np.ndarray, old_log_probs: np.ndarray,
                       advantages: np.ndarray, returns: np.ndarray,
                       cfg: TrainConfig, reg: RegConfig, lam: float,
                       normalize_adv: bool = True):
    """One minibatch loss and its exact gradients for actor and critic.

    Loss: clipped surrogate - entropy_coef * entropy + value_coef * value MSE
    + lam * connection cost. Returns (parts, actor dW, actor db, critic dW,
    critic db); masked-parameter gradients are zero.
    """
    nb = len(obs)
    adv = advantages
    if normalize_adv:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    logits, acts_a = forward(actor, obs, record=True)
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    idx = np.arange(nb)
    logp = logp_all[idx, actions]
    ratio = np.exp(logp - old_log_probs)
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    obj_raw = ratio * adv
    obj_clip = clipped * adv
    pg_loss = -float(np.minimum(obj_raw, obj_clip).mean())
    if not math.isfinite(pg_loss):
        raise RuntimeError(
            f"non-finite policy loss (ratio range "
            f"[{ratio.min()}, {ratio.max()}], adv range "
            f"[{adv.min()}, {adv.max()}])")
    # gradient flows through the raw ratio only where it attains the min
    dratio = np.where(obj_raw <= obj_clip, adv, 0.0) * (-1.0 / nb)
    dlogp = dratio * ratio
    dlogits = -probs * dlogp[:, None]
    dlogits[idx, actions] += dlogp

    ent = -(probs * logp_all).sum(axis=1)
    entropy = float(ent.mean())
    dH = -probs * (logp_all + ent[:, None])
    dlogits += (-cfg.entropy_coef / nb) * dH

    dWa, dba = backward(actor, acts_a, dlogits)

    cc = 0.0
    if lam != 0.0:
        cc = connection_cost(actor, reg, lam)
        for g, extra in zip(dWa, connection_cost_grad(actor, reg, lam)):
            g += extra

    v_out, acts_c = forward(critic, obs, record=True)
    v = v_out[:, 0]
    verr = v - returns
    v_loss = cfg.value_coef * float(np.mean(verr ** 2))
    dv = (cfg.value_coef * 2.0 / nb) * verr
    dWc, dbc = backward(critic, acts_c, dv[:, None])

    total = pg_loss - cfg.entropy_coef * entropy + v_loss + cc
    parts = {"total": total, "policy": pg_loss, "entropy": entropy,
             "value": v_loss, "cc": cc}
    if not math.isfinite(total):
        raise RuntimeError(f"non-finite PPO loss: {parts}")
    return parts, dWa, dba, dWc, dbc


class Adam:
    """Adam over one flattened parameter vector, with optional norm clipping."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        total = sum(p.size for p in params)
        self.m = np.zeros(total)
        self.v = np.zeros(total)
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray],
             max_norm: float | None = None) -> None:
        g = np.concatenate([a.ravel() for a in grads])
        if max_norm is not None:
            total = math.sqrt(float(g @ g))
            if total > max_norm:
                g *= max_norm / (total + 1e-6)
        self.t += 1
        self.m += (1.0 - self.beta1) * (g - self.m)
        self.v += (1.0 - self.beta2) * (g * g - self.v)
        mhat = self.m / (1.0 - self.beta1 ** self.t)
        vhat = self.v / (1.0 - self.beta2 ** self.t)
        delta = self.lr * mhat / (np.sqrt(vhat) + self.eps)
        off = 0
        for p in params:
            p -= delta[off:off + p.size].reshape(p.shape)
            off += p.size


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> float:
    total = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if total > max_norm:
        scale = max_norm / (total + 1e-6)
        for g in grads:
            g *= scale
    return total


def _opt_params(actor: SpatialMLP, critic: SpatialMLP) -> list[np.ndarray]:
    return [*actor.weights, *actor.biases, *critic.weights, *critic.biases]


def ppo_update(actor: SpatialMLP, critic: SpatialMLP, batch: RolloutBatch,
               cfg: TrainConfig, reg: RegConfig, lam: float, adam: Adam,
               rng: np.random.Generator) -> dict:
    """Run the full epochs x minibatches pass over one rollout in place."""
    b = cfg.batch_size
    obs = batch.obs.reshape(b, -1)
    actions = batch.actions.reshape(b)
    old_logp = batch.log_probs.reshape(b)
    adv = batch.advantages.reshape(b)
    rets = batch.returns.reshape(b)
    mb_size = b // cfg.minibatches
    sums = {"total": 0.0, "policy": 0.0, "entropy": 0.0, "value": 0.0, "cc": 0.0}
    count = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(b)
        for k in range(cfg.minibatches):
            sl = perm[k * mb_size:(k + 1) * mb_size]
            parts, dWa, dba, dWc, dbc = ppo_loss_and_grads(
                actor, critic, obs[sl], actions[sl], old_logp[sl], adv[sl],
                rets[sl], cfg, reg, lam)
            adam.step(_opt_params(actor, critic), [*dWa, *dba, *dWc, *dbc],
                      max_norm=cfg.max_grad_norm)
            for key in sums:
                sums[key] += parts[key]
            count += 1
    return {k: v / count for k, v in sums.items()}


def prune(net: SpatialMLP, fraction: float = 0.01) -> tuple[SpatialMLP, dict]:
    """Mask weights and hidden neurons below ``fraction`` of their layer maxima.

    A weight is masked when |w| is strictly below fraction * max|w| of its
    layer; a hidden neuron is masked when its weighted degree is strictly
    below fraction * the layer's maximum degree (computed after weight
    masking). Masking a neuron masks all its incident weights and its bias.
    Input and output neurons are never masked. Layers that are entirely
    zero are left untouched.
    """
    out = net.copy()
    for l in range(out.n_weight_layers):
        w = np.abs(out.effective_weights(l))
        mx = w.max()
        if mx > 0.0:
            out.weight_masks[l] &= w >= fraction * mx
    for layer in range(1, len(out.layer_sizes) - 1):
        deg = weighted_degrees(out, layer)
        mx = deg.max()
        if mx > 0.0:
            out.neuron_masks[layer] &= deg >= fraction * mx
    out.apply_masks()  # folds neuron masks into weight masks, zeroes storage
    report = {
        "fraction": fraction,
        "weights_masked": sum(int((~m).sum()) for m in out.weight_masks),
        "weights_total": sum(m.size for m in out.weight_masks),
        "sparsity": out.sparsity(),
        "neurons_masked": sum(int((~m).sum()) for m in out.neuron_masks),
    }
    return out, report


@dataclass
class TrainResult:
    actor_raw: SpatialMLP
    actor_pruned: SpatialMLP
    actor: SpatialMLP               # fine-tuned
    critic: SpatialMLP
    metrics: list[dict]
    prune_report: dict
    checkpoint_paths: dict = field(default_factory=dict)


def _metrics_row(update, frames, envs: EnvBatch, stats, lam, sparsity):
    return {"update": update, "frames": frames,
            "mean_return": envs.mean_return(),
            "loss_total": stats["total"], "loss_cc": stats["cc"],
            "lambda": lam, "sparsity_frac": sparsity}


def write_metrics_csv(rows: list[dict], path: str, config_hash: str = "",
                      seed: int = 0) -> None:
    lines = [f"# config_hash={config_hash} seed={seed}"]
    lines.append(",".join(METRICS_COLUMNS))
    for r in rows:
        lines.append(",".join(str(r[c]) for c in METRICS_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def train(kind: str, cfg: TrainConfig, reg: RegConfig | None = None,
          env_options: dict | None = None, out_dir: str | None = None,
          run_hash: str = "", progress=None) -> TrainResult:
    """Full two-phase pipeline: regularised PPO, prune, fine-tune.

    ``progress`` may be a callable taking the metrics row of each update.
    When ``out_dir`` is given, raw/pruned/finetuned checkpoints and the
    metrics CSV are written there.
    """
    cfg.validate()
    reg = reg if reg is not None else RegConfig()
    reg.validate()
    opts = dict(env_options or {})

    ss = np.random.SeedSequence(cfg.seed)
    s_actor, s_critic, s_envs, s_actions, s_updates = ss.spawn(5)
    d = obs_dim(kind, opts.get("mask_opponent", False))
    actor = init_network([d, *cfg.hidden, N_ACTIONS[kind]], s_actor,
                         activation=cfg.activation)
    critic = init_network([d, *cfg.hidden, 1], s_critic, out_gain=1.0,
                          activation=cfg.activation)
    envs = EnvBatch(kind, s_envs.spawn(cfg.n_envs), opts)
    rng_actions = np.random.default_rng(s_actions)
    rng_updates = np.random.default_rng(s_updates)

    metrics: list[dict] = []
    frames = 0
    update = 0

    def run_phase(n_frames: int, reg_phase: RegConfig, relocation: bool,
                  lam_total: int) -> None:
        nonlocal frames, update
        adam = Adam(_opt_params(actor, critic), cfg.learning_rate)
        n_updates = math.ceil(n_frames / cfg.batch_size)
        for u in range(n_updates):
            lam = schedule_lambda(min(frames, lam_total), lam_total, reg_phase) \
                if lam_total > 0 else 0.0
            batch = collect_rollout(actor, critic, envs, cfg.n_steps, rng_actions)
            compute_gae(batch, cfg.gamma, cfg.gae_lambda)
            stats = ppo_update(actor, critic, batch, cfg, reg_phase, lam,
                               adam, rng_updates)
            if relocation and reg_phase.relocate_every > 0 and lam > 0.0 \
                    and (u + 1) % reg_phase.relocate_every == 0:
                relocate_neurons(actor, reg_phase)
            frames += cfg.batch_size
            update += 1
            row = _metrics_row(update, frames, envs, stats, lam, actor.sparsity())
            metrics.append(row)
            if progress is not None:
                progress(row)

    run_phase(cfg.total_frames, reg, relocation=True, lam_total=cfg.total_frames)
    actor_raw = actor.copy()

    actor_pruned, prune_report = prune(actor, cfg.prune_fraction)
    actor = actor_pruned.copy()

    off = RegConfig(lambda_cc=0.0, d_s=reg.d_s, penalty=reg.penalty,
                    distance_weighted=reg.distance_weighted)
    run_phase(cfg.finetune_frames, off, relocation=False, lam_total=0)

    result = TrainResult(actor_raw=actor_raw, actor_pruned=actor_pruned,
                         actor=actor, critic=critic, metrics=metrics,
                         prune_report=prune_report)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stages = {"raw": (actor_raw, cfg.total_frames),
                  "pruned": (actor_pruned, cfg.total_frames),
                  "finetuned": (actor, cfg.total_frames + cfg.finetune_frames)}
        for stage, (net, fr) in stages.items():
            meta = {"env": kind, "lambda_cc": reg.lambda_cc, "d_s": reg.d_s,
                    "seed": cfg.seed, "frames": fr, "stage": stage,
                    "config_hash": run_hash, "env_options": opts,
                    "mask_opponent": bool(opts.get("mask_opponent", False))}
            path = out / f"checkpoint_{stage}.json"
            save_checkpoint(net, str(path), meta)
            result.checkpoint_paths[stage] = str(path)
        write_metrics_csv(metrics, str(out / "metrics.csv"), run_hash, cfg.seed)
        result.checkpoint_paths["metrics"] = str(out / "metrics.csv")
    return result


def greedy_action(policy, obs: np.ndarray) -> int:
    logits = forward(policy, obs) if isinstance(policy, SpatialMLP) else policy(obs)
    return int(np.argmax(logits))


def evaluate(policy, kind: str, episodes: int, seed: int,
             env_options: dict | None = None) -> float:
    """Mean episode return under greedy (argmax) action selection."""
    env = make_env(kind, seed, **(env_options or {}))
    total = 0.0
    for _ in range(episodes):
        obs = env.reset()
        done = False
        while not done:
            obs, r, done, _ = env.step(greedy_action(policy, obs))
            total += r
    return total / episodes
