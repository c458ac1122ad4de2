from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import counter_rng, keys


@dataclass(frozen=True)
class EnvState:
    """Batched environment state; every field has a leading row axis.

    ``key``/``episode`` form the random stream: episode ``e`` of row ``i`` is
    initialised from ``counter_rng(key[i], e)``, so a step is a pure
    function of ``(state, action)``.
    """
    data: dict
    t: np.ndarray
    terminal: np.ndarray
    key: np.ndarray
    episode: np.ndarray

    @property
    def n(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    reward: np.ndarray
    done: np.ndarray
    trial_done: np.ndarray


class Env:
    """Batched pure-functional environment.

    Subclasses implement ``_initial``, ``_observe`` and ``_dynamics``.
    """

    obs_dim: int
    n_actions: int
    horizon: int

    def _initial(self, rng: np.random.Generator) -> dict:
        raise NotImplementedError

    def _observe(self, data: dict, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _dynamics(self, data: dict, t: np.ndarray, action: np.ndarray):
        raise NotImplementedError

    def init(self, seed: int, n: int, *path) -> tuple[EnvState, np.ndarray]:
        """Fresh batch of ``n`` rows and their initial observations."""
        k = keys(seed, n, type(self).__name__, *path)
        empty = EnvState({}, np.zeros(n, int), np.zeros(n, bool), k, np.zeros(n, np.uint64))
        state = self.reset_rows(empty, np.ones(n, bool))
        return state, self._observe(state.data, state.t)

    def reset_rows(self, state: EnvState, mask: np.ndarray) -> EnvState:
        rows = np.flatnonzero(mask)
        if len(rows) == 0:
            return state
        data = {k: v.copy() for k, v in state.data.items()}
        episode = state.episode.copy()
        t = state.t.copy()
        terminal = state.terminal.copy()
        for i in rows:
            init = self._initial(counter_rng(state.key[i], episode[i]))
            for name, val in init.items():
                if name not in data:
                    data[name] = np.zeros((state.n, *np.shape(val)), np.asarray(val).dtype)
                data[name][i] = val
            episode[i] += 1
        t[rows] = 0
        terminal[rows] = False
        return EnvState(data, t, terminal, state.key, episode)

    def observe(self, state: EnvState) -> np.ndarray:
        return self._observe(state.data, state.t)

    def check_action(self, action) -> np.ndarray:
        action = np.asarray(action)
        if not np.issubdtype(action.dtype, np.integer):
            if np.any(action != np.round(action)):
                raise ValueError("actions must be integer indices")
            action = action.astype(int)
        if np.any((action < 0) | (action >= self.n_actions)):
            raise ValueError(f"action out of range [0, {self.n_actions})")
        return action

    def step(self, state: EnvState, action, auto_reset: bool = True) -> tuple[EnvState, Transition]:
        """Advance every row.  With ``auto_reset`` finished rows restart and
        the returned observation is the new episode's first one."""
        action = self.check_action(action)
        if action.shape != (state.n,):
            raise ValueError(f"expected {state.n} actions, got shape {action.shape}")
        data, reward, done = self._dynamics(state.data, state.t, action)
        new = EnvState(data, state.t + 1, done, state.key, state.episode)
        if auto_reset:
            new = self.reset_rows(new, done)
        obs = self._observe(new.data, new.t)
        return new, Transition(obs, reward, done, done)
