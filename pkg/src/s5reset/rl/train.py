from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..rng import stream
from .rollout import RolloutState, collect_rollout, start_rollouts
from .updates import TrainerConfig, a2c_update, make_optimizer, ppo_update

METRIC_COLUMNS = [
    "update", "step", "episodes", "mean_return", "loss", "policy_loss", "value_loss",
    "entropy", "grad_norm", "approx_kl", "clip_frac", "wallclock_ms",
]


@dataclass
class TrainResult:
    params: object
    rollouts: RolloutState
    rows: list[dict]
    reached_target: bool
    episodes_to_target: int | None


def train_iter(env, params, cfg: TrainerConfig, seed: int, window: int = 100
               ) -> Iterator[tuple[dict, object, RolloutState]]:
    """Synchronous on-policy loop yielding ``(metric_row, params, rollouts)``
    after every update."""
    rs = start_rollouts(env, params, cfg.n_envs, seed, stream(seed, "actions"))
    opt = make_optimizer(cfg)
    upd_rng = stream(seed, "minibatches")
    t0 = time.perf_counter()
    update = 0
    while rs.steps < cfg.total_steps and (cfg.max_episodes <= 0
                                          or len(rs.episode_returns) < cfg.max_episodes):
        batch, rs = collect_rollout(env, params, rs, cfg.unroll_length)
        if cfg.algo == "a2c":
            params, m = a2c_update(params, batch, cfg, opt)
        else:
            params, m = ppo_update(params, batch, cfg, opt, upd_rng)
        update += 1
        recent = rs.episode_returns[-window:]
        row = {c: "" for c in METRIC_COLUMNS}
        row.update(m)
        row.update(update=update, step=rs.steps, episodes=len(rs.episode_returns),
                   mean_return=float(np.mean(recent)) if recent else float("nan"),
                   wallclock_ms=round((time.perf_counter() - t0) * 1000.0, 1))
        yield row, params, rs


def train(env, params, cfg: TrainerConfig, seed: int, target_return: float | None = None,
          window: int = 100, on_row=None) -> TrainResult:
    """Run ``train_iter`` to budget, or until the mean return over the last
    ``window`` completed episodes reaches ``target_return``."""
    rows: list[dict] = []
    rs = None
    reached, at = False, None
    for row, params, rs in train_iter(env, params, cfg, seed, window):
        rows.append(row)
        if on_row is not None:
            on_row(row)
        if (target_return is not None and len(rs.episode_returns) >= window
                and row["mean_return"] >= target_return):
            reached, at = True, row["episodes"]
            break
    return TrainResult(params, rs, rows, reached, at)


def evaluate_trials(env, params, seed: int, n_envs: int, n_episodes: int, n_trials: int,
                    greedy: bool = False) -> np.ndarray:
    """Mean return per trial index over ``n_episodes`` completed meta-episodes."""
    rs = start_rollouts(env, params, n_envs, seed, stream(seed, "eval-actions"))
    while len(rs.episode_returns) < n_episodes:
        _, rs = collect_rollout(env, params, rs, 256, greedy=greedy)
    sums = np.zeros(n_trials)
    counts = np.zeros(n_trials)
    for idx, ret in rs.trial_returns:
        if idx < n_trials:
            sums[idx] += ret
            counts[idx] += 1
    return sums / np.maximum(counts, 1)
