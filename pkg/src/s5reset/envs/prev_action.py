"""Agent-side input augmentation: append a one-hot of the last action taken.

Without it a stochastic agent on a projected task sees the consequence of
its action but not the action itself, so it cannot tell which projection it
was given.  The wrapped environment is untouched; the one-hot is zeroed on
the first observation of every meta-episode.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Transition


@dataclass(frozen=True)
class PreviousActionState:
    inner: object
    prev: np.ndarray  # (n, A) one-hot, zero after a done

    @property
    def n(self) -> int:
        return self.prev.shape[0]


class PreviousActionObs:
    def __init__(self, env):
        self.env = env
        self.n_actions = env.n_actions
        self.obs_dim = env.obs_dim + env.n_actions
        self.horizon = env.horizon

    def init(self, seed: int, n: int, *path):
        state, obs = self.env.init(seed, n, *path)
        prev = np.zeros((n, self.n_actions))
        return PreviousActionState(state, prev), np.concatenate([obs, prev], axis=1)

    def step(self, state: PreviousActionState, action):
        inner, tr = self.env.step(state.inner, action)
        prev = np.eye(self.n_actions)[np.asarray(action, int)] * ~tr.done[:, None]
        obs = np.concatenate([tr.obs, prev], axis=1)
        return PreviousActionState(inner, prev), Transition(obs, tr.reward, tr.done, tr.trial_done)
