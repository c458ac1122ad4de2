from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..layer import HiddenStateStack, NetworkParams, hidden_init, network_forward
from .gru import GruBaselineParams, gru_baseline_forward, gru_hidden_init


def policy_forward(params, obs, hidden: HiddenStateStack, resets, workers: int = 1):
    """``(logits, values, hidden')`` for either architecture."""
    if isinstance(params, GruBaselineParams):
        return gru_baseline_forward(params, obs, hidden, resets)
    return network_forward(params, obs, hidden, resets, workers)


def initial_hidden(params, batch: int) -> HiddenStateStack:
    if isinstance(params, GruBaselineParams):
        return gru_hidden_init(params, batch)
    P = np.shape(ad.value_of(params.s5_layers[0].ssm.lam))[0]
    return hidden_init(len(params.s5_layers), P, batch)


def select_rows(hidden: HiddenStateStack, rows) -> HiddenStateStack:
    return HiddenStateStack(tuple(h[rows] for h in hidden.states))


@dataclass
class RolloutBatch:
    """``B`` rows of ``L`` consecutive steps.

    ``scan_resets[:, t] = dones[:, t-1]``; column 0 carries whether the slice
    starts a fresh episode.  ``start_hidden`` is the recurrent state the
    acting network held before step 0.
    """
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    trial_dones: np.ndarray
    scan_resets: np.ndarray
    start_hidden: HiddenStateStack
    bootstrap: np.ndarray
    logp: np.ndarray
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.rewards.shape

    def rows(self, idx) -> "RolloutBatch":
        return RolloutBatch(self.obs[idx], self.actions[idx], self.rewards[idx], self.dones[idx],
                            self.trial_dones[idx], self.scan_resets[idx],
                            select_rows(self.start_hidden, idx), self.bootstrap[idx],
                            self.logp[idx], self.values[idx])


@dataclass
class RolloutState:
    """Everything carried between rollout slices."""
    env_state: object
    obs: np.ndarray
    hidden: HiddenStateStack
    prev_done: np.ndarray
    rng: np.random.Generator
    ep_return: np.ndarray
    trial_return: np.ndarray
    trial_index: np.ndarray
    steps: int = 0
    episode_returns: list = field(default_factory=list)
    trial_returns: list = field(default_factory=list)  # (trial index, return)


def start_rollouts(env, params, n_envs: int, seed: int, rng: np.random.Generator) -> RolloutState:
    env_state, obs = env.init(seed, n_envs)
    z = np.zeros(n_envs)
    return RolloutState(env_state, obs, initial_hidden(params, n_envs),
                        np.ones(n_envs, bool), rng, z.copy(), z.copy(), np.zeros(n_envs, int))


def sample_actions(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=-1, keepdims=True)
    u = rng.random(p.shape[:-1])
    return np.minimum((np.cumsum(p, axis=-1) < u[..., None]).sum(axis=-1), p.shape[-1] - 1)


def log_probs(logits: np.ndarray, actions: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    return np.take_along_axis(z, actions[..., None], axis=-1)[..., 0] - lse


def collect_rollout(env, params, rs: RolloutState, length: int, greedy: bool = False
                    ) -> tuple[RolloutBatch, RolloutState]:
    """Step every env ``length`` times with the current policy.

    Finished envs auto-reset; the hidden state is not zeroed here, the next
    step's scan reset flag (the shifted done) does that.
    """
    B = rs.obs.shape[0]
    if rs.obs.shape[1] != env.obs_dim:
        raise ValueError(f"observation width {rs.obs.shape[1]} != env width {env.obs_dim}")
    obs = np.empty((B, length, env.obs_dim))
    actions = np.empty((B, length), int)
    rewards = np.empty((B, length))
    dones = np.empty((B, length), bool)
    trial_dones = np.empty((B, length), bool)
    resets = np.empty((B, length), bool)
    logp = np.empty((B, length))
    values = np.empty((B, length))
    start_hidden = rs.hidden
    hidden, prev_done, cur_obs, env_state = rs.hidden, rs.prev_done, rs.obs, rs.env_state
    ep_ret, tr_ret, tr_idx = rs.ep_return.copy(), rs.trial_return.copy(), rs.trial_index.copy()
    for t in range(length):
        logits, v, hidden = policy_forward(params, cur_obs[:, None], hidden, prev_done[:, None])
        lg = logits.value[:, 0]
        a = np.argmax(lg, axis=-1) if greedy else sample_actions(lg, rs.rng)
        env_state, tr = env.step(env_state, a)
        obs[:, t] = cur_obs
        actions[:, t] = a
        rewards[:, t] = tr.reward
        dones[:, t] = tr.done
        trial_dones[:, t] = tr.trial_done
        resets[:, t] = prev_done
        logp[:, t] = log_probs(lg, a)
        values[:, t] = v.value[:, 0]
        ep_ret += tr.reward
        tr_ret += tr.reward
        for i in np.flatnonzero(tr.trial_done):
            rs.trial_returns.append((int(tr_idx[i]), float(tr_ret[i])))
        tr_ret[tr.trial_done] = 0.0
        tr_idx = np.where(tr.done, 0, tr_idx + tr.trial_done)
        for i in np.flatnonzero(tr.done):
            rs.episode_returns.append(float(ep_ret[i]))
        ep_ret[tr.done] = 0.0
        prev_done = tr.done
        cur_obs = tr.obs
    _, v_last, _ = policy_forward(params, cur_obs[:, None], hidden, prev_done[:, None])
    batch = RolloutBatch(obs, actions, rewards, dones, trial_dones, resets, start_hidden,
                         v_last.value[:, 0], logp, values)
    new = RolloutState(env_state, cur_obs, hidden, prev_done, rs.rng, ep_ret, tr_ret, tr_idx,
                       rs.steps + B * length, rs.episode_returns, rs.trial_returns)
    return batch, new
