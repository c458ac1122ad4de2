from __future__ import annotations

import numpy as np

from .base import Env


class RepeatPrevious(Env):
    """Emit one-hot symbols; the agent must output the symbol seen ``lag``
    steps earlier.

    Rewards are ``+1/T`` for a match and ``-1/T`` otherwise; the first
    ``lag`` steps pay nothing and accept any action.
    """

    def __init__(self, n_symbols: int = 4, lag: int = 8, horizon: int = 64):
        if not 0 <= lag < horizon:
            raise ValueError("need 0 <= lag < horizon")
        self.n_symbols = n_symbols
        self.lag = lag
        self.horizon = horizon
        self.obs_dim = n_symbols
        self.n_actions = n_symbols

    def _initial(self, rng):
        return {"symbols": rng.integers(0, self.n_symbols, size=self.horizon)}

    def _observe(self, data, t):
        idx = np.minimum(t, self.horizon - 1)
        sym = data["symbols"][np.arange(t.shape[0]), idx]
        return np.eye(self.n_symbols)[sym]

    def _dynamics(self, data, t, action):
        rows = np.arange(t.shape[0])
        target = data["symbols"][rows, np.maximum(t - self.lag, 0)]
        scored = t >= self.lag
        reward = np.where(scored, np.where(action == target, 1.0, -1.0), 0.0) / self.horizon
        return data, reward, t + 1 >= self.horizon
