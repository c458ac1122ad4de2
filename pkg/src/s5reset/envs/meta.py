"""Random-projection meta-environment.

Each task is an inner environment drawn from a list plus a
``ProjectionPair``: observations are mapped ``o' = M_o o`` to a fixed width
``O`` and the agent's action (one of ``A`` choices, one-hot encoded) is mapped
``a' = M_a a`` into the inner action space.  Discrete inner actions are the
argmax of ``a'``.  The step follows the multi-environment meta-learning
procedure: when the previous step terminated, this step ignores the action,
resets, and returns ``[M_o o, 0, 0]``; otherwise it projects the action,
steps, and returns ``[M_o o, r, d]``.

With ``n_trials > 1`` a task (and its projections) is kept for that many
consecutive inner episodes; ``Transition.trial_done`` marks every inner
episode end and ``Transition.done`` only the last one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import counter_rng, keys
from .base import Env, EnvState, Transition


@dataclass(frozen=True)
class ProjectionPair:
    m_o: np.ndarray  # (O, E_o)
    m_a: np.ndarray  # (E_a, A)


@dataclass(frozen=True)
class MetaState:
    inner: tuple[EnvState, ...]  # one batched state per inner env type
    env_idx: np.ndarray  # (n,)
    m_o: np.ndarray  # (n, O, max E_o), zero padded
    m_a: np.ndarray  # (n, max E_a, A), zero padded
    last_done: np.ndarray  # (n,) previous step ended an inner episode
    trial: np.ndarray  # (n,) index of the current trial
    key: np.ndarray
    episode: np.ndarray

    @property
    def n(self) -> int:
        return self.env_idx.shape[0]

    def projection(self, i: int, envs) -> ProjectionPair:
        e = envs[self.env_idx[i]]
        return ProjectionPair(self.m_o[i, :, :e.obs_dim], self.m_a[i, :e.n_actions, :])


def sample_projection(rng: np.random.Generator, O: int, A: int, e_obs: int, e_act: int,
                      max_tries: int = 1000) -> ProjectionPair:
    """Gaussian projections with std ``1/sqrt(fan_in)``.

    ``M_a`` is redrawn until every inner action is reachable from some agent
    action; otherwise a task could be uncontrollable.
    """
    m_o = rng.normal(0.0, 1.0 / np.sqrt(e_obs), (O, e_obs))
    for _ in range(max_tries):
        m_a = rng.normal(0.0, 1.0 / np.sqrt(A), (e_act, A))
        if len(np.unique(np.argmax(m_a, axis=0))) == e_act:
            return ProjectionPair(m_o, m_a)
    raise ValueError(f"could not cover {e_act} inner actions with {A} agent actions")


def identity_projection(O: int, A: int, e_obs: int, e_act: int) -> ProjectionPair:
    return ProjectionPair(np.eye(O, e_obs), np.eye(e_act, A))


class MetaEnv:
    def __init__(self, envs: list[Env], obs_size: int = 12, act_size: int = 2,
                 n_trials: int = 1, projection: str = "random"):
        if n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if projection not in ("random", "identity"):
            raise ValueError(f"unknown projection kind {projection!r}")
        if any(e.n_actions > act_size for e in envs):
            raise ValueError("act_size must cover every inner action space")
        self.envs = list(envs)
        self.O = obs_size
        self.A = act_size
        self.n_trials = n_trials
        self.projection = projection
        self.obs_dim = obs_size + 2
        self.n_actions = act_size
        self.horizon = n_trials * max(e.horizon + 1 for e in envs)
        self._eo = max(e.obs_dim for e in envs)
        self._ea = max(e.n_actions for e in envs)

    def _new_tasks(self, state: MetaState, mask) -> MetaState:
        env_idx, m_o, m_a = state.env_idx.copy(), state.m_o.copy(), state.m_a.copy()
        episode = state.episode.copy()
        for i in np.flatnonzero(mask):
            rng = counter_rng(state.key[i], episode[i])
            j = int(rng.integers(len(self.envs)))
            e = self.envs[j]
            if self.projection == "identity":
                pp = identity_projection(self.O, self.A, e.obs_dim, e.n_actions)
            else:
                pp = sample_projection(rng, self.O, self.A, e.obs_dim, e.n_actions)
            env_idx[i] = j
            m_o[i] = 0.0
            m_a[i] = 0.0
            m_o[i, :, :e.obs_dim] = pp.m_o
            m_a[i, :e.n_actions, :] = pp.m_a
            episode[i] += 1
        return MetaState(state.inner, env_idx, m_o, m_a, state.last_done, state.trial,
                         state.key, episode)

    def _inner_obs(self, inner, env_idx) -> np.ndarray:
        out = np.zeros((env_idx.shape[0], self._eo))
        for j, (e, s) in enumerate(zip(self.envs, inner)):
            rows = env_idx == j
            if rows.any():
                out[rows, :e.obs_dim] = e.observe(s)[rows]
        return out

    def _project(self, m_o, o, r, d) -> np.ndarray:
        return np.concatenate([np.einsum("noe,ne->no", m_o, o), r[:, None], d[:, None]], axis=1)

    def init(self, seed: int, n: int, *path) -> tuple[MetaState, np.ndarray]:
        inner = tuple(e.init(seed, n, "meta", j, *path)[0] for j, e in enumerate(self.envs))
        state = MetaState(inner, np.zeros(n, int), np.zeros((n, self.O, self._eo)),
                          np.zeros((n, self._ea, self.A)), np.zeros(n, bool), np.zeros(n, int),
                          keys(seed, n, "meta-tasks", *path), np.zeros(n, np.uint64))
        state = self._new_tasks(state, np.ones(n, bool))
        inner = tuple(e.reset_rows(s, state.env_idx == j)
                      for j, (e, s) in enumerate(zip(self.envs, state.inner)))
        state = MetaState(inner, state.env_idx, state.m_o, state.m_a, state.last_done,
                          state.trial, state.key, state.episode)
        zeros = np.zeros(n)
        return state, self._project(state.m_o, self._inner_obs(inner, state.env_idx), zeros, zeros)

    def step(self, state: MetaState, action) -> tuple[MetaState, Transition]:
        action = np.asarray(action)
        if action.shape != (state.n,):
            raise ValueError(f"expected {state.n} actions, got shape {action.shape}")
        if np.any((action < 0) | (action >= self.A)):
            raise ValueError(f"action out of range [0, {self.A})")
        n = state.n
        resetting = state.last_done
        new_task = resetting & (state.trial >= self.n_trials - 1)
        state = self._new_tasks(state, new_task)
        trial = np.where(new_task, 0, np.where(resetting, state.trial + 1, state.trial))

        # project agent actions: a' = M_a onehot(a) is column ``a`` of M_a
        a_proj = state.m_a[np.arange(n), :, action]
        reward = np.zeros(n)
        done = np.zeros(n, bool)
        inner = []
        for j, (e, s) in enumerate(zip(self.envs, state.inner)):
            rows = state.env_idx == j
            inner_action = np.argmax(a_proj[:, :e.n_actions], axis=1)
            stepped, tr = e.step(s, inner_action, auto_reset=False)
            s = _select(rows & ~resetting, stepped, s)
            s = e.reset_rows(s, rows & resetting)
            reward = np.where(rows & ~resetting, tr.reward, reward)
            done = np.where(rows & ~resetting, tr.done, done)
            inner.append(s)
        inner = tuple(inner)
        obs = self._project(state.m_o, self._inner_obs(inner, state.env_idx), reward,
                            done.astype(float))
        outer = done & (trial >= self.n_trials - 1)
        new = MetaState(inner, state.env_idx, state.m_o, state.m_a, done, trial,
                        state.key, state.episode)
        return new, Transition(obs, reward, outer, done)


def _select(mask, a: EnvState, b: EnvState) -> EnvState:
    """Rows from ``a`` where ``mask`` else from ``b``."""
    def pick(x, y):
        m = mask.reshape(-1, *([1] * (np.ndim(x) - 1)))
        return np.where(m, x, y)
    data = {k: pick(a.data[k], b.data[k]) for k in a.data}
    return EnvState(data, pick(a.t, b.t), pick(a.terminal, b.terminal), a.key,
                    pick(a.episode, b.episode))


def trial_episode_wrapper(inner: Env | list[Env], n_trials: int, obs_size: int = 12,
                          act_size: int = 2, projection: str = "random") -> MetaEnv:
    """Meta-environment that keeps each sampled task for ``n_trials`` episodes."""
    envs = inner if isinstance(inner, list) else [inner]
    return MetaEnv(envs, obs_size, act_size, n_trials, projection)
