from __future__ import annotations

import numpy as np

from .base import Env


class MemoryLength(Env):
    """T-maze style memory task.

    A cue in {-1, +1} is shown only on the first of ``memory_length + 1``
    steps; on the last step the agent must answer with action 1 for +1 and
    action 0 for -1 (reward +1 if right, -1 if wrong, 0 elsewhere).
    Observation: ``[cue, countdown, query]`` with countdown ``1 - t/N``.
    """

    obs_dim = 3
    n_actions = 2

    def __init__(self, memory_length: int = 4):
        if memory_length < 1:
            raise ValueError("memory_length must be >= 1")
        self.memory_length = memory_length
        self.horizon = memory_length + 1

    def _initial(self, rng):
        return {"cue": rng.choice([-1.0, 1.0])}

    def _observe(self, data, t):
        n = self.memory_length
        obs = np.zeros((t.shape[0], 3))
        obs[:, 0] = np.where(t == 0, data["cue"], 0.0)
        obs[:, 1] = 1.0 - np.minimum(t, n) / n
        obs[:, 2] = t >= n
        return obs

    def _dynamics(self, data, t, action):
        final = t >= self.memory_length
        correct = (2 * action - 1) == data["cue"]
        reward = np.where(final, np.where(correct, 1.0, -1.0), 0.0)
        return data, reward, final
