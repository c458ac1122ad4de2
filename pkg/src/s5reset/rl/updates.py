"""A2C and PPO losses and single-update steps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..layer import flatten, lift, unflatten
from .optim import Adam, clip_by_global_norm
from .rollout import RolloutBatch, policy_forward
from .targets import gae, td_lambda_targets


@dataclass
class TrainerConfig:
    algo: str = "a2c"
    lr: float = 3e-4
    gamma: float = 0.99
    td_lambda: float = 0.9
    ent_coef: float = 0.0
    value_weight: float = 1.0
    unroll_length: int = 32
    n_envs: int = 1
    clip_eps: float = 0.2
    epochs: int = 1
    minibatches: int = 1
    max_grad_norm: float | None = None
    total_steps: int = 10_000_000
    # stop after this many completed episodes (0 = no episode cap)
    max_episodes: int = 10_000
    normalize_advantages: bool = False
    freeze_ssm: bool = False

    def __post_init__(self):
        if not (0 <= self.gamma <= 1 and 0 <= self.td_lambda <= 1):
            raise ValueError("gamma and td_lambda must lie in [0, 1]")
        for name in ("unroll_length", "n_envs", "epochs", "minibatches"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.algo not in ("a2c", "ppo"):
            raise ValueError(f"unknown algo {self.algo!r}")

    @classmethod
    def a2c_defaults(cls, **kw) -> "TrainerConfig":
        return cls(**{"algo": "a2c", "lr": 3e-4, "ent_coef": 0.0, "gamma": 0.99,
                      "td_lambda": 0.9, "n_envs": 1, "unroll_length": 32,
                      "max_episodes": 10_000, **kw})

    @classmethod
    def ppo_defaults(cls, **kw) -> "TrainerConfig":
        return cls(**{"algo": "ppo", "lr": 5e-5, "n_envs": 64, "unroll_length": 1024,
                      "total_steps": 15_000_000, "epochs": 30, "minibatches": 8,
                      "gamma": 0.99, "td_lambda": 1.0, "clip_eps": 0.2, "ent_coef": 0.0,
                      "value_weight": 1.0, "max_grad_norm": 0.5, "max_episodes": 0,
                      "normalize_advantages": True, **kw})


def _entropy(logp_all):
    return ad.mul(ad.sum_last(ad.mul(ad.exp(logp_all), logp_all)), -1.0)


def a2c_loss(params, batch: RolloutBatch, cfg: TrainerConfig, targets: np.ndarray | None = None,
             adv: np.ndarray | None = None):
    """Targets and advantages are constants of the loss (semi-gradient).
    Pass them in to pin them; otherwise both come from the current value head."""
    logits, values, _ = policy_forward(params, batch.obs, batch.start_hidden, batch.scan_resets)
    v = values.value
    if targets is None:
        targets = td_lambda_targets(batch.rewards, v, batch.dones, batch.bootstrap,
                                    cfg.gamma, cfg.td_lambda)
    if adv is None:
        adv = targets - v
    logp_all = ad.log_softmax(logits)
    logp = ad.pick(logp_all, batch.actions)
    pg = ad.mul(ad.mean(ad.mul(logp, adv)), -1.0)
    vloss = ad.mean(ad.square(ad.sub(values, targets)))
    ent = ad.mean(_entropy(logp_all))
    loss = ad.add(ad.add(pg, ad.mul(vloss, cfg.value_weight)), ad.mul(ent, -cfg.ent_coef))
    return loss, {"policy_loss": float(pg.value), "value_loss": float(vloss.value),
                  "entropy": float(ent.value)}


def ppo_loss(params, batch: RolloutBatch, adv: np.ndarray, returns: np.ndarray,
             cfg: TrainerConfig):
    logits, values, _ = policy_forward(params, batch.obs, batch.start_hidden, batch.scan_resets)
    if cfg.normalize_advantages:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    logp_all = ad.log_softmax(logits)
    logp = ad.pick(logp_all, batch.actions)
    ratio = ad.exp(ad.sub(logp, batch.logp))
    clipped = ad.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    surr = ad.minimum(ad.mul(ratio, adv), ad.mul(clipped, adv))
    pg = ad.mul(ad.mean(surr), -1.0)
    vloss = ad.mean(ad.square(ad.sub(values, returns)))
    ent = ad.mean(_entropy(logp_all))
    loss = ad.add(ad.add(pg, ad.mul(vloss, cfg.value_weight)), ad.mul(ent, -cfg.ent_coef))
    r = ratio.value
    return loss, {"policy_loss": float(pg.value), "value_loss": float(vloss.value),
                  "entropy": float(ent.value),
                  "approx_kl": float(np.mean((r - 1) - np.log(r))),
                  "clip_frac": float(np.mean(np.abs(r - 1) > cfg.clip_eps))}


def loss_and_grad(params, loss_fn):
    """``(loss, metrics, grads)`` with grads keyed like ``flatten(params)``."""
    tape = ad.Tape()
    lp = lift(params, tape)
    loss, metrics = loss_fn(lp)
    if not np.isfinite(loss.value):
        raise FloatingPointError(f"non-finite loss {loss.value}; metrics {metrics}")
    g = tape.backward(loss)
    grads = {k: g.get(v.id, np.zeros_like(v.value)) for k, v in flatten(lp).items()}
    return float(loss.value), metrics, grads


def make_optimizer(cfg: TrainerConfig) -> Adam:
    if cfg.freeze_ssm:
        return Adam(cfg.lr, frozen=lambda name: ".ssm." in name)
    return Adam(cfg.lr)


def _apply(params, grads, cfg, opt):
    grads, norm = clip_by_global_norm(grads, cfg.max_grad_norm)
    flat = opt.step(flatten(params), grads)
    return unflatten(params, flat), norm


def a2c_update(params, batch: RolloutBatch, cfg: TrainerConfig, opt: Adam):
    loss, metrics, grads = loss_and_grad(params, lambda p: a2c_loss(p, batch, cfg))
    params, norm = _apply(params, grads, cfg, opt)
    return params, {**metrics, "loss": loss, "grad_norm": norm}


def ppo_update(params, batch: RolloutBatch, cfg: TrainerConfig, opt: Adam,
               rng: np.random.Generator):
    """Clipped-surrogate epochs over row minibatches; each minibatch re-runs
    the network from its stored start state."""
    adv, returns = gae(batch.rewards, batch.values, batch.dones, batch.bootstrap,
                       cfg.gamma, cfg.td_lambda)
    B = batch.shape[0]
    n_mb = min(cfg.minibatches, B)
    log: dict[str, list] = {}
    for _ in range(cfg.epochs):
        for rows in np.array_split(rng.permutation(B), n_mb):
            mb = batch.rows(rows)
            loss, metrics, grads = loss_and_grad(
                params, lambda p: ppo_loss(p, mb, adv[rows], returns[rows], cfg))
            params, norm = _apply(params, grads, cfg, opt)
            for k, v in {**metrics, "loss": loss, "grad_norm": norm}.items():
                log.setdefault(k, []).append(v)
    return params, {k: float(np.mean(v)) for k, v in log.items()}
